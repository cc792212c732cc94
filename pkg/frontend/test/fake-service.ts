/**
 * In-memory stand-in for the promptware service, speaking the same wire
 * contract: schema-bearing template listing, preview with full validation
 * reports, mock-prefixed feedback, and pack reload. Tests mutate the pack
 * and inject failures to drive every UI path without a network.
 */

import type { FetchLike, SlotSpec, StaticInfo, ValidationItem } from "../src/api.js";

interface PendingFailure {
  status: number;
  code: string;
  message: string;
}

function jsonResponse(status: number, body: unknown): Response {
  return {
    ok: status >= 200 && status < 300,
    status,
    statusText: String(status),
    json: async () => body,
  } as unknown as Response;
}

export function defaultSlots(): SlotSpec[] {
  return [
    {
      name: "valence",
      label: "Valence",
      kind: "single_choice",
      choices: [
        { value: "positive", label: "Positive" },
        { value: "critical", label: "Critical" },
        { value: "sandwich", label: "Sandwich" },
      ],
    },
    {
      name: "abstraction",
      label: "Level of abstraction",
      kind: "single_choice",
      choices: [
        { value: "high_level", label: "High-level" },
        { value: "specific", label: "Specific" },
      ],
    },
    {
      name: "feedback_type",
      label: "Feedback type",
      kind: "single_choice",
      choices: [
        { value: "content", label: "Content" },
        { value: "structure", label: "Structure" },
        { value: "style", label: "Style" },
        { value: "actionability", label: "Actionability" },
      ],
    },
    {
      name: "genre",
      label: "Genre",
      kind: "single_choice",
      default: "essay",
      choices: [
        { value: "essay", label: "Essay" },
        { value: "email", label: "Email" },
        { value: "statement_of_purpose", label: "Statement of purpose" },
      ],
    },
    { name: "input", label: "Writing sample", kind: "free_text" },
  ];
}

export class FakeService {
  slots: SlotSpec[] = defaultSlots();
  statics: StaticInfo[] = [{ id: "pros_and_cons", label: "Pros and Cons" }];
  staticBodies: Record<string, string> = {
    pros_and_cons: "List the pros and then the cons of my next message.",
  };
  packVersion = 1;

  previewCalls = 0;
  feedbackCalls = 0;
  reloadCalls = 0;
  lastPreviewText: string | null = null;
  lastFeedbackText: string | null = null;

  private feedbackFailure: PendingFailure | null = null;
  private feedbackGate: Promise<void> | null = null;

  failNextFeedback(status: number, code: string, message: string): void {
    this.feedbackFailure = { status, code, message };
  }

  /** Makes the next feedback call wait until the returned release is called. */
  holdNextFeedback(): () => void {
    let release: () => void = () => undefined;
    this.feedbackGate = new Promise((resolve) => {
      release = resolve;
    });
    return release;
  }

  /** Deterministic prompt fill; each slot value appears exactly once. */
  renderPrompt(selection: Record<string, string>): string {
    const parts = this.slots
      .filter((slot) => slot.kind === "single_choice")
      .map((slot) => `${slot.name}=${selection[slot.name]}`);
    return `FEEDBACK REQUEST [${parts.join("|")}]\n---\n${selection["input"]}`;
  }

  private validate(selection: Record<string, string>): ValidationItem[] {
    const items: ValidationItem[] = [];
    for (const slot of this.slots) {
      const bound = selection[slot.name];
      if (bound === undefined) {
        if (slot.default === undefined) {
          items.push({
            code: "E_MISSING_SLOT",
            slot: slot.name,
            message: `slot '${slot.name}' has no binding and no default`,
          });
        }
        continue;
      }
      if (slot.kind === "single_choice") {
        const values = (slot.choices ?? []).map((c) => c.value);
        if (!values.includes(bound)) {
          items.push({
            code: "E_ILLEGAL_VALUE",
            slot: slot.name,
            message: `'${bound}' is not a valid choice`,
            value: bound,
          });
        }
      }
    }
    return items;
  }

  private resolve(body: any): { status: number; payload: unknown; text?: string } {
    if (body.mode === "freeform") {
      return {
        status: 200,
        payload: {
          text: body.freeform_text,
          provenance: { mode: "freeform", source_id: null, version: null },
        },
        text: body.freeform_text,
      };
    }
    if (body.mode === "static") {
      const prompt = this.staticBodies[body.static_id];
      if (prompt === undefined) {
        return {
          status: 404,
          payload: { error: "E_UNKNOWN_STATIC", message: "no such static prompt" },
        };
      }
      return {
        status: 200,
        payload: {
          text: prompt,
          provenance: { mode: "static", source_id: body.static_id, version: null },
        },
        text: prompt,
      };
    }
    const selection: Record<string, string> = { ...body.selection };
    for (const slot of this.slots) {
      if (selection[slot.name] === undefined && slot.default !== undefined) {
        selection[slot.name] = slot.default;
      }
    }
    const items = this.validate(body.selection ?? {});
    if (items.length > 0) {
      return {
        status: 422,
        payload: { error: "E_VALIDATION", message: "selection failed validation", items },
      };
    }
    const text = this.renderPrompt(selection);
    return {
      status: 200,
      payload: {
        text,
        provenance: { mode: "template", source_id: "feedback_request", version: 1 },
      },
      text,
    };
  }

  fetch: FetchLike = async (input, init) => {
    const url = new URL(input, "http://fake.test");
    const method = init?.method ?? "GET";
    if (init?.signal?.aborted) {
      throw new DOMException("aborted", "AbortError");
    }
    if (url.pathname === "/api/templates" && method === "GET") {
      return jsonResponse(200, [
        { id: "feedback_request", name: "Feedback request", version: 1, slots: this.slots },
      ]);
    }
    if (url.pathname === "/api/statics" && method === "GET") {
      return jsonResponse(200, this.statics);
    }
    if (url.pathname === "/api/health" && method === "GET") {
      return jsonResponse(200, {
        status: "ok",
        pack_version: this.packVersion,
        provider_kind: "mock",
      });
    }
    if (url.pathname === "/api/reload" && method === "POST") {
      this.reloadCalls += 1;
      return jsonResponse(200, { pack_version: this.packVersion });
    }
    const body = JSON.parse((init?.body as string) ?? "{}");
    if (url.pathname === "/api/preview" && method === "POST") {
      this.previewCalls += 1;
      const resolved = this.resolve(body);
      if (resolved.status === 200) {
        this.lastPreviewText = resolved.text ?? null;
      }
      return jsonResponse(resolved.status, resolved.payload);
    }
    if (url.pathname === "/api/feedback" && method === "POST") {
      this.feedbackCalls += 1;
      if (this.feedbackGate !== null) {
        const gate = this.feedbackGate;
        this.feedbackGate = null;
        await gate;
      }
      if (this.feedbackFailure !== null) {
        const failure = this.feedbackFailure;
        this.feedbackFailure = null;
        return jsonResponse(failure.status, {
          error: failure.code,
          message: failure.message,
        });
      }
      const resolved = this.resolve(body);
      if (resolved.status !== 200) {
        return jsonResponse(resolved.status, resolved.payload);
      }
      const text = `MOCK[fa4e5eed]:${resolved.text}`;
      this.lastFeedbackText = text;
      return jsonResponse(200, {
        job: {
          job_id: "job-1",
          state: "done",
          mode: body.mode,
          resolved: resolved.payload,
          result: {
            text,
            attempts: 1,
            latency: 0,
            provider: { kind: "mock", model: "mock-model" },
          },
        },
      });
    }
    return jsonResponse(404, { error: "E_NOT_FOUND", message: url.pathname });
  };
}

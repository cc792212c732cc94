/**
 * The FeedbackBuffet browser app, rendered entirely from the service's
 * schema: paste a sample, pick options, watch the server-confirmed prompt
 * preview, request feedback, iterate. Pack edits reach the UI with zero
 * client changes because every control group is generated from
 * GET /api/templates; nothing here hard-codes an option value.
 */

import { ApiClient, ApiError } from "./api.js";
import type {
  PromptRequestBody,
  SlotSpec,
  StaticInfo,
  TemplateInfo,
  ValidationItem,
} from "./api.js";
import {
  UiState,
  canSubmit,
  debounce,
  defaultsFrom,
  initialState,
  selectionFor,
} from "./state.js";

export interface AppOptions {
  previewDebounceMs?: number;
}

export interface AppHandles {
  root: HTMLElement;
  state: UiState;
  /** Resolves once the initial menu load settles (ok or offline banner). */
  ready: Promise<void>;
  /** Re-reads packs on the server, then rebuilds the menu. */
  reloadPacks(): Promise<void>;
  /** The slots currently rendered (empty before the menu loads). */
  slots(): SlotSpec[];
}

const PREVIEW_DEBOUNCE_MS = 300;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

export function createApp(root: HTMLElement, api: ApiClient, options: AppOptions = {}): AppHandles {
  const state = initialState();
  let template: TemplateInfo | null = null;
  let statics: StaticInfo[] = [];
  let previewAbort: AbortController | null = null;
  let previewSeq = 0;

  root.innerHTML = "";
  root.classList.add("pw-app");

  const banner = el("div", { "data-role": "banner", class: "pw-banner", hidden: "" });
  const header = el("header");
  header.append(el("h1", {}, "FeedbackBuffet"));
  const reloadButton = el("button", { "data-role": "reload", type: "button" }, "Reload packs");
  header.append(reloadButton);

  const nav = el("nav", { class: "pw-tabs" });
  const panels: Record<string, HTMLElement> = {
    template: el("section", { "data-panel": "template" }),
    freeform: el("section", { "data-panel": "freeform", hidden: "" }),
    static: el("section", { "data-panel": "static", hidden: "" }),
  };
  for (const [name, label] of [
    ["template", "Feedback options"],
    ["freeform", "Free-form"],
    ["static", "One-click prompts"],
  ] as const) {
    const tab = el("button", { "data-tab": name, type: "button" }, label);
    tab.addEventListener("click", () => {
      for (const [panelName, panel] of Object.entries(panels)) {
        panel.hidden = panelName !== name;
      }
    });
    nav.append(tab);
  }

  // Step 1: the writing sample.
  const sampleLabel = el("label", {}, "Writing sample");
  const sample = el("textarea", { "data-role": "sample", rows: "8" });
  sampleLabel.append(sample);

  // Step 2: option controls, generated from the schema at load time.
  const optionsBox = el("div", { "data-role": "options" });

  const submit = el("button", { "data-role": "submit", type: "button" }, "Request feedback");
  panels.template.append(sampleLabel, optionsBox, submit);

  const freeformText = el("textarea", { "data-role": "freeform-text", rows: "6" });
  const freeformSend = el("button", { "data-role": "freeform-send", type: "button" }, "Send");
  panels.freeform.append(
    el("p", {}, "Write the whole prompt yourself; it is sent unchanged."),
    freeformText,
    freeformSend,
  );

  const staticBox = el("div", { "data-role": "static-buttons" });
  panels.static.append(staticBox);

  // Steps 3 and 5: the server-confirmed preview and the feedback text.
  const preview = el("pre", { "data-role": "preview", class: "pw-preview" });
  const result = el("pre", { "data-role": "result", class: "pw-result" });

  root.append(
    header,
    banner,
    nav,
    panels.template,
    panels.freeform,
    panels.static,
    el("h2", {}, "Prompt preview"),
    preview,
    el("h2", {}, "Feedback"),
    result,
  );

  function setBanner(message: string | null): void {
    state.banner = message;
    banner.hidden = message === null;
    banner.textContent = message ?? "";
  }

  function setBusy(busy: boolean): void {
    state.busy = busy;
    refreshSubmitState();
    freeformSend.disabled = busy;
    for (const button of staticBox.querySelectorAll("button")) {
      (button as HTMLButtonElement).disabled = busy;
    }
  }

  function refreshSubmitState(): void {
    submit.disabled = template === null || !canSubmit(state, template.slots);
  }

  function clearInlineErrors(): void {
    for (const span of optionsBox.querySelectorAll("[data-role=slot-error]")) {
      span.textContent = "";
      (span as HTMLElement).hidden = true;
    }
  }

  function showInlineErrors(items: ValidationItem[]): void {
    clearInlineErrors();
    state.previewItems = items;
    for (const item of items) {
      const span = optionsBox.querySelector(
        `fieldset[data-slot="${item.slot}"] [data-role=slot-error]`,
      ) as HTMLElement | null;
      if (span !== null) {
        span.textContent = item.code === "E_MISSING_SLOT" ? "missing" : item.message;
        span.hidden = false;
      }
    }
  }

  function buildControls(slots: SlotSpec[]): void {
    optionsBox.innerHTML = "";
    for (const slot of slots) {
      if (slot.kind === "free_text") {
        if (slot.name === "input") {
          sampleLabel.firstChild!.textContent = slot.label;
          continue;
        }
        const group = el("fieldset", { "data-slot": slot.name });
        group.append(el("legend", {}, slot.label));
        const area = el("textarea", { "data-free-text": slot.name, rows: "3" });
        area.addEventListener("input", () => {
          state.selected[slot.name] = area.value;
          schedulePreview();
        });
        state.selected[slot.name] = state.selected[slot.name] ?? "";
        group.append(area, el("span", { "data-role": "slot-error", hidden: "" }));
        optionsBox.append(group);
        continue;
      }
      const group = el("fieldset", { "data-slot": slot.name });
      group.append(el("legend", {}, slot.label));
      for (const choice of slot.choices ?? []) {
        const label = el("label", { class: "pw-choice" });
        const radio = el("input", {
          type: "radio",
          name: slot.name,
          value: choice.value,
        }) as HTMLInputElement;
        radio.checked = state.selected[slot.name] === choice.value;
        radio.addEventListener("change", () => {
          state.selected[slot.name] = choice.value;
          refreshSubmitState();
          schedulePreview();
        });
        label.append(radio, document.createTextNode(" " + choice.label));
        group.append(label);
      }
      group.append(el("span", { "data-role": "slot-error", hidden: "" }));
      optionsBox.append(group);
    }
    refreshSubmitState();
  }

  function buildStatics(): void {
    staticBox.innerHTML = "";
    for (const info of statics) {
      const button = el(
        "button",
        { "data-static": info.id, type: "button" },
        info.label,
      );
      button.addEventListener("click", () => void sendRequest({ mode: "static", static_id: info.id }));
      staticBox.append(button);
    }
  }

  function currentTemplateRequest(): PromptRequestBody | null {
    if (template === null) {
      return null;
    }
    return {
      mode: "template",
      template_id: template.id,
      selection: selectionFor(state, template.slots),
    };
  }

  async function refreshPreview(body?: PromptRequestBody): Promise<void> {
    const request = body ?? currentTemplateRequest();
    if (request === null) {
      return;
    }
    previewAbort?.abort();
    const controller = new AbortController();
    previewAbort = controller;
    const seq = ++previewSeq;
    try {
      const resolved = await api.preview(request, controller.signal);
      if (seq !== previewSeq) {
        return; // superseded
      }
      state.preview = resolved.text;
      state.previewItems = [];
      preview.textContent = resolved.text;
      clearInlineErrors();
    } catch (error) {
      if (seq !== previewSeq || (error instanceof DOMException && error.name === "AbortError")) {
        return;
      }
      if (error instanceof ApiError && error.status === 422) {
        state.preview = null;
        preview.textContent = "";
        showInlineErrors(error.items);
        return;
      }
      setBanner(`preview failed: ${String(error)}`);
    }
  }

  const schedulePreview = debounce(
    () => void refreshPreview(),
    options.previewDebounceMs ?? PREVIEW_DEBOUNCE_MS,
  );

  async function sendRequest(body: PromptRequestBody | null): Promise<void> {
    if (body === null || state.busy) {
      return;
    }
    setBusy(true);
    setBanner(null);
    try {
      // the preview panel always shows what this exact request resolves to
      await refreshPreview(body);
      const job = await api.feedback(body);
      state.result = job.result?.text ?? "";
      result.textContent = state.result;
    } catch (error) {
      // user state (sample, selections, previous result) is left untouched
      if (error instanceof ApiError) {
        setBanner(`${error.code}: ${error.message}`);
      } else {
        setBanner(`request failed: ${String(error)}`);
      }
    } finally {
      setBusy(false);
    }
  }

  sample.addEventListener("input", () => {
    state.sampleText = sample.value;
    refreshSubmitState();
    schedulePreview();
  });

  submit.addEventListener("click", () => void sendRequest(currentTemplateRequest()));

  freeformSend.addEventListener("click", () => {
    if (freeformText.value !== "") {
      void sendRequest({ mode: "freeform", freeform_text: freeformText.value });
    }
  });

  async function loadMenu(): Promise<void> {
    const [templates, staticList] = await Promise.all([api.templates(), api.statics()]);
    if (templates.length === 0) {
      throw new ApiError(503, "E_NO_REGISTRY", "service has no templates");
    }
    template = templates[0];
    statics = staticList;
    // keep selections that are still valid after a pack edit
    const defaults = defaultsFrom(template.slots);
    const kept: Record<string, string> = {};
    for (const slot of template.slots) {
      const current = state.selected[slot.name];
      if (slot.kind === "single_choice" && current !== undefined) {
        if ((slot.choices ?? []).some((c) => c.value === current)) {
          kept[slot.name] = current;
        }
      }
      if (slot.kind === "free_text" && slot.name !== "input" && current !== undefined) {
        kept[slot.name] = current;
      }
    }
    state.selected = { ...defaults, ...kept };
    buildControls(template.slots);
    buildStatics();
    setBanner(null);
  }

  async function initialLoad(): Promise<void> {
    try {
      await loadMenu();
    } catch (error) {
      template = null;
      optionsBox.innerHTML = "";
      setBanner(
        `service unreachable (${String(
          error instanceof ApiError ? error.code : error,
        )}) — use "Reload packs" to retry`,
      );
      refreshSubmitState();
    }
  }

  async function reloadPacks(): Promise<void> {
    try {
      await api.reload();
    } catch {
      // reload endpoint failing is not fatal; re-fetching the menu decides
    }
    await initialLoad();
    schedulePreview();
  }

  reloadButton.addEventListener("click", () => void reloadPacks());

  const ready = initialLoad();

  return {
    root,
    state,
    ready,
    reloadPacks,
    slots: () => template?.slots ?? [],
  };
}

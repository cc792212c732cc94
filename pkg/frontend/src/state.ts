/**
 * Pure UI state and transitions, kept out of the DOM layer so they are
 * trivially testable. The invariants that matter: submission is blocked
 * while busy or while anything required is missing, and no error path
 * ever clears the user's sample or selections.
 */

import type { SlotSpec, ValidationItem } from "./api.js";

export interface UiState {
  sampleText: string;
  selected: Record<string, string>;
  preview: string | null;
  previewItems: ValidationItem[];
  result: string | null;
  banner: string | null;
  busy: boolean;
}

export function initialState(): UiState {
  return {
    sampleText: "",
    selected: {},
    preview: null,
    previewItems: [],
    result: null,
    banner: null,
    busy: false,
  };
}

/** Preselected values: every slot that declares a default. */
export function defaultsFrom(slots: SlotSpec[]): Record<string, string> {
  const selected: Record<string, string> = {};
  for (const slot of slots) {
    if (slot.default !== undefined) {
      selected[slot.name] = slot.default;
    }
  }
  return selected;
}

export function singleChoiceSlots(slots: SlotSpec[]): SlotSpec[] {
  return slots.filter((s) => s.kind === "single_choice");
}

/** Required-and-missing slot names; the sample box counts as `input`. */
export function missingSlots(state: UiState, slots: SlotSpec[]): string[] {
  const missing: string[] = [];
  for (const slot of slots) {
    if (slot.kind === "single_choice" && !(slot.name in state.selected)) {
      missing.push(slot.name);
    }
    if (slot.kind === "free_text" && slot.name === "input" && state.sampleText === "") {
      missing.push(slot.name);
    }
  }
  return missing;
}

export function canSubmit(state: UiState, slots: SlotSpec[]): boolean {
  return !state.busy && missingSlots(state, slots).length === 0;
}

/** The selection object the service expects for the template request. */
export function selectionFor(state: UiState, slots: SlotSpec[]): Record<string, string> {
  const selection: Record<string, string> = {};
  for (const slot of slots) {
    if (slot.kind === "single_choice" && slot.name in state.selected) {
      selection[slot.name] = state.selected[slot.name];
    }
    if (slot.kind === "free_text" && slot.name === "input") {
      selection[slot.name] = state.sampleText;
    }
  }
  return selection;
}

export interface Debounced<A extends unknown[]> {
  (...args: A): void;
  cancel(): void;
}

/** Trailing-edge debounce; superseded calls never fire. */
export function debounce<A extends unknown[]>(
  fn: (...args: A) => void,
  waitMs: number,
): Debounced<A> {
  let timer: ReturnType<typeof setTimeout> | null = null;
  const wrapped = (...args: A): void => {
    if (timer !== null) {
      clearTimeout(timer);
    }
    timer = setTimeout(() => {
      timer = null;
      fn(...args);
    }, waitMs);
  };
  wrapped.cancel = () => {
    if (timer !== null) {
      clearTimeout(timer);
      timer = null;
    }
  };
  return wrapped;
}

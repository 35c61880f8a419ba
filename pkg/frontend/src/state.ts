// Session view model and its pure transitions. Every displayed number lives
// in the `state`/`batch` mirrors fetched from the service; this module only
// tracks what the human has clicked, never invents counts or progress.

import type { BatchDoc, StateDoc } from "./api.js";

export type Connection = "ok" | "lost";

export interface ViewModel {
  sessionId: string | null;
  state: StateDoc | null;
  batch: BatchDoc | null;
  /** example id -> chosen class, only for ids in the current batch */
  selections: Record<number, number>;
  /** card the 1..K keyboard shortcuts label next */
  focusId: number | null;
  /** pending guard: true from submit click until the service answers */
  submitting: boolean;
  error: string | null;
  connection: Connection;
}

export function initialModel(): ViewModel {
  return {
    sessionId: null,
    state: null,
    batch: null,
    selections: {},
    focusId: null,
    submitting: false,
    error: null,
    connection: "ok",
  };
}

export function applyState(vm: ViewModel, doc: StateDoc): ViewModel {
  return { ...vm, sessionId: doc.session_id, state: doc, connection: "ok" };
}

function firstUnlabeled(batch: BatchDoc, selections: Record<number, number>): number | null {
  for (const item of batch.batch) {
    if (!(item.id in selections)) return item.id;
  }
  return null;
}

/** Install a fetched batch; selections for ids still present survive a
    re-fetch so a retry never loses the human's work. */
export function applyBatch(vm: ViewModel, doc: BatchDoc): ViewModel {
  const keep: Record<number, number> = {};
  for (const item of doc.batch) {
    if (item.id in vm.selections) keep[item.id] = vm.selections[item.id];
  }
  return {
    ...vm,
    batch: doc,
    selections: keep,
    focusId: firstUnlabeled(doc, keep),
    connection: "ok",
  };
}

export function selectLabel(vm: ViewModel, exampleId: number, classId: number): ViewModel {
  if (vm.submitting || vm.batch === null) return vm;
  if (classId < 1 || classId > vm.batch.num_classes) return vm;
  if (!vm.batch.batch.some((item) => item.id === exampleId)) return vm;
  const selections = { ...vm.selections, [exampleId]: classId };
  return { ...vm, selections, focusId: firstUnlabeled(vm.batch, selections), error: null };
}

export function setFocus(vm: ViewModel, exampleId: number): ViewModel {
  if (vm.batch === null || !vm.batch.batch.some((item) => item.id === exampleId)) return vm;
  return { ...vm, focusId: exampleId };
}

/** The service rejects partial batches, so the submit button only arms once
    every card has a label. */
export function canSubmit(vm: ViewModel): boolean {
  if (vm.submitting || vm.batch === null || vm.batch.status !== "active") return false;
  if (vm.batch.batch.length === 0) return false;
  return vm.batch.batch.every((item) => item.id in vm.selections);
}

/** Arm the pending guard. Returns null when a submit is already in flight
    (or the batch is incomplete), so a double-click cannot double-submit. */
export function beginSubmit(vm: ViewModel): ViewModel | null {
  if (!canSubmit(vm)) return null;
  return { ...vm, submitting: true, error: null };
}

export function submitSucceeded(vm: ViewModel, doc: StateDoc): ViewModel {
  return {
    ...applyState(vm, doc),
    batch: null,
    selections: {},
    focusId: null,
    submitting: false,
    error: null,
  };
}

/** Rejection keeps every selection so the human can fix and resend. */
export function submitFailed(vm: ViewModel, message: string): ViewModel {
  return { ...vm, submitting: false, error: message };
}

export function connectionLost(vm: ViewModel, message: string): ViewModel {
  return { ...vm, connection: "lost", error: message, submitting: false };
}

/** Poll delay: base cadence while healthy, doubling per consecutive failure
    up to a 15 s ceiling. */
export function pollDelay(consecutiveFailures: number): number {
  if (consecutiveFailures <= 0) return 1500;
  return Math.min(1500 * 2 ** consecutiveFailures, 15000);
}

import { describe, expect, it } from "vitest";

import type { BatchDoc, StateDoc } from "../src/api.js";
import {
  applyBatch,
  applyState,
  beginSubmit,
  canSubmit,
  connectionLost,
  initialModel,
  pollDelay,
  selectLabel,
  setFocus,
  submitFailed,
  submitSucceeded,
  type ViewModel,
} from "../src/state.js";

function batchDoc(ids: number[], numClasses = 3): BatchDoc {
  return {
    session_id: "abc123",
    status: "active",
    batch: ids.map((id) => ({ id, features: [0.5, -1.25] })),
    round: 1,
    phase: "phase1",
    class_id: 2,
    num_classes: numClasses,
  };
}

function stateDoc(overrides: Partial<StateDoc> = {}): StateDoc {
  return {
    session_id: "abc123",
    status: "active",
    strategy: "direct",
    round: 1,
    rounds_total: 4,
    rounds_completed: 1,
    phase: "phase1",
    class_id: 2,
    num_classes: 3,
    labeled_total: 12,
    target_total: 48,
    pending_count: 5,
    class_counts: [2, 4, 6],
    minority_class: 1,
    minority_fraction: 0.16666666666666666,
    j_hat: { "1": 40 },
    ...overrides,
  };
}

function labeledModel(ids: number[] = [7, 8, 9]): ViewModel {
  let vm = applyBatch(initialModel(), batchDoc(ids));
  for (const id of ids) vm = selectLabel(vm, id, 1);
  return vm;
}

describe("selection rules", () => {
  it("records a choice and advances focus to the next unlabeled card", () => {
    let vm = applyBatch(initialModel(), batchDoc([7, 8, 9]));
    expect(vm.focusId).toBe(7);
    vm = selectLabel(vm, 7, 2);
    expect(vm.selections[7]).toBe(2);
    expect(vm.focusId).toBe(8);
  });

  it("rejects classes outside 1..K and ids outside the batch", () => {
    const vm = applyBatch(initialModel(), batchDoc([7, 8]));
    expect(selectLabel(vm, 7, 0)).toBe(vm);
    expect(selectLabel(vm, 7, 4)).toBe(vm);
    expect(selectLabel(vm, 99, 1)).toBe(vm);
  });

  it("ignores clicks while a submit is in flight", () => {
    const armed = beginSubmit(labeledModel());
    expect(armed).not.toBeNull();
    const after = selectLabel(armed!, 7, 3);
    expect(after.selections[7]).toBe(1);
  });

  it("setFocus only lands on cards that exist", () => {
    const vm = applyBatch(initialModel(), batchDoc([7, 8]));
    expect(setFocus(vm, 8).focusId).toBe(8);
    expect(setFocus(vm, 99).focusId).toBe(7);
  });
});

describe("submit gating", () => {
  it("stays disarmed until every card has a label", () => {
    let vm = applyBatch(initialModel(), batchDoc([7, 8, 9]));
    expect(canSubmit(vm)).toBe(false);
    vm = selectLabel(vm, 7, 1);
    vm = selectLabel(vm, 8, 2);
    expect(canSubmit(vm)).toBe(false);
    vm = selectLabel(vm, 9, 3);
    expect(canSubmit(vm)).toBe(true);
  });

  it("double-click cannot double-submit: the second begin returns null", () => {
    const vm = labeledModel();
    const first = beginSubmit(vm);
    expect(first).not.toBeNull();
    expect(beginSubmit(first!)).toBeNull();
  });

  it("never arms on an empty or terminal batch", () => {
    const done: BatchDoc = { ...batchDoc([]), status: "done", batch: [] };
    expect(canSubmit(applyBatch(initialModel(), done))).toBe(false);
  });
});

describe("failure handling keeps human work", () => {
  it("a rejected submit preserves every selection and surfaces the error", () => {
    const armed = beginSubmit(labeledModel())!;
    const after = submitFailed(armed, "batch_mismatch: submitted ids must match");
    expect(after.submitting).toBe(false);
    expect(after.error).toContain("batch_mismatch");
    expect(after.selections).toEqual({ 7: 1, 8: 1, 9: 1 });
    expect(canSubmit(after)).toBe(true);
  });

  it("a connection drop flags the banner without touching the batch", () => {
    const vm = labeledModel();
    const lost = connectionLost(vm, "fetch failed");
    expect(lost.connection).toBe("lost");
    expect(lost.batch).toBe(vm.batch);
    expect(lost.selections).toEqual(vm.selections);
  });

  it("re-fetching the same batch keeps selections, dropping stale ids", () => {
    let vm = applyBatch(initialModel(), batchDoc([7, 8, 9]));
    vm = selectLabel(vm, 7, 2);
    vm = selectLabel(vm, 8, 3);
    const refetched = applyBatch(vm, batchDoc([7, 8, 10]));
    expect(refetched.selections).toEqual({ 7: 2, 8: 3 });
    expect(refetched.focusId).toBe(10);
  });
});

describe("success path", () => {
  it("clears the batch and mirrors the fresh state document", () => {
    const armed = beginSubmit(labeledModel())!;
    const doc = stateDoc({ labeled_total: 15, pending_count: 0 });
    const after = submitSucceeded(armed, doc);
    expect(after.batch).toBeNull();
    expect(after.selections).toEqual({});
    expect(after.submitting).toBe(false);
    expect(after.state).toBe(doc);
  });

  it("applyState mirrors the document and restores the connection flag", () => {
    const lost = connectionLost(initialModel(), "down");
    const vm = applyState(lost, stateDoc());
    expect(vm.connection).toBe("ok");
    expect(vm.state?.labeled_total).toBe(12);
  });
});

describe("poll backoff", () => {
  it("uses the base cadence while healthy and doubles per failure to a cap", () => {
    expect(pollDelay(0)).toBe(1500);
    expect(pollDelay(1)).toBe(3000);
    expect(pollDelay(2)).toBe(6000);
    expect(pollDelay(3)).toBe(12000);
    expect(pollDelay(4)).toBe(15000);
    expect(pollDelay(10)).toBe(15000);
  });
});

// Browser wiring: one session per tab, state polling with backoff, event
// delegation for the batch panel, 1..K keyboard shortcuts.

import { ApiError, Client, type LabelEntry } from "./api.js";
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
} from "./state.js";
import { renderBatch, renderProgress } from "./render.js";

function element<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing #${id}`);
  return node as T;
}

const apiInput = element<HTMLInputElement>("api-base");
const sessionInput = element<HTMLInputElement>("session-id");
const configArea = element<HTMLTextAreaElement>("config-json");
const annotatorInput = element<HTMLInputElement>("annotator");
const createBtn = element<HTMLButtonElement>("create-session");
const joinBtn = element<HTMLButtonElement>("join-session");
const formError = element<HTMLParagraphElement>("form-error");
const batchPanel = element<HTMLDivElement>("batch-panel");
const progressPanel = element<HTMLDivElement>("progress-panel");

let vm: ViewModel = initialModel();
let client: Client | null = null;
let failures = 0;
let pollTimer: number | undefined;

function logUrl(): string | null {
  return client !== null && vm.sessionId !== null ? client.logUrl(vm.sessionId) : null;
}

function redraw(): void {
  batchPanel.innerHTML = renderBatch(vm, logUrl());
  progressPanel.innerHTML = renderProgress(vm.state, logUrl());
}

function update(next: ViewModel): void {
  vm = next;
  redraw();
}

async function refreshBatch(): Promise<void> {
  if (client === null || vm.sessionId === null) return;
  const doc = await client.getBatch(vm.sessionId);
  update(applyBatch(vm, doc));
}

async function pollOnce(): Promise<void> {
  if (client === null || vm.sessionId === null) return;
  try {
    const state = await client.getState(vm.sessionId);
    update(applyState(vm, state));
    failures = 0;
    if (state.status === "active" && state.pending_count > 0 && vm.batch === null) {
      await refreshBatch();
    }
    if (state.status === "done" && pollTimer !== undefined) {
      window.clearTimeout(pollTimer);
      pollTimer = undefined;
      return;
    }
  } catch (err) {
    failures += 1;
    update(connectionLost(vm, err instanceof Error ? err.message : String(err)));
  }
  pollTimer = window.setTimeout(() => void pollOnce(), pollDelay(failures));
}

function startSession(sessionId: string): void {
  if (pollTimer !== undefined) window.clearTimeout(pollTimer);
  client = new Client(apiInput.value.replace(/\/+$/, ""));
  vm = { ...initialModel(), sessionId };
  sessionInput.value = sessionId;
  window.location.hash = sessionId;
  failures = 0;
  redraw();
  void pollOnce();
}

async function submit(): Promise<void> {
  const armed = beginSubmit(vm);
  if (armed === null || client === null || vm.sessionId === null || vm.batch === null) return;
  const labels: LabelEntry[] = vm.batch.batch.map((item) => ({
    id: item.id,
    label: vm.selections[item.id],
  }));
  update(armed);
  try {
    const state = await client.submitLabels(
      vm.sessionId,
      labels,
      annotatorInput.value || "anonymous",
    );
    update(submitSucceeded(vm, state));
    if (state.status === "active" && state.pending_count > 0) await refreshBatch();
  } catch (err) {
    if (err instanceof ApiError) {
      update(submitFailed(vm, `${err.code}: ${err.message}`));
    } else {
      update(connectionLost(vm, err instanceof Error ? err.message : String(err)));
    }
  }
}

batchPanel.addEventListener("click", (event) => {
  const target = event.target as HTMLElement;
  const labelBtn = target.closest("[data-label-btn]");
  if (labelBtn instanceof HTMLElement) {
    const exampleId = Number(labelBtn.dataset.example);
    const classId = Number(labelBtn.dataset.class);
    update(setFocus(selectLabel(vm, exampleId, classId), exampleId));
    return;
  }
  if (target.closest("[data-submit]") !== null) void submit();
  const card = target.closest("[data-card]");
  if (card instanceof HTMLElement) update(setFocus(vm, Number(card.dataset.card)));
});

document.addEventListener("keydown", (event) => {
  if (vm.batch === null || document.activeElement instanceof HTMLTextAreaElement) return;
  if (document.activeElement instanceof HTMLInputElement) return;
  const items = vm.batch.batch;
  if (event.key >= "1" && event.key <= "9") {
    const classId = Number(event.key);
    if (vm.focusId !== null && classId <= vm.batch.num_classes) {
      update(selectLabel(vm, vm.focusId, classId));
      event.preventDefault();
    }
    return;
  }
  if (event.key === "ArrowDown" || event.key === "ArrowUp") {
    const index = items.findIndex((item) => item.id === vm.focusId);
    const step = event.key === "ArrowDown" ? 1 : -1;
    const next = items[(index + step + items.length) % items.length];
    if (next !== undefined) update(setFocus(vm, next.id));
    event.preventDefault();
    return;
  }
  if (event.key === "Enter" && canSubmit(vm)) {
    void submit();
    event.preventDefault();
  }
});

createBtn.addEventListener("click", () => {
  formError.textContent = "";
  let config: object;
  try {
    config = JSON.parse(configArea.value) as object;
  } catch (err) {
    formError.textContent = `config is not valid JSON: ${(err as Error).message}`;
    return;
  }
  const probe = new Client(apiInput.value.replace(/\/+$/, ""));
  probe
    .createSession(config)
    .then((created) => startSession(created.session_id))
    .catch((err) => {
      formError.textContent =
        err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
    });
});

joinBtn.addEventListener("click", () => {
  formError.textContent = "";
  const id = sessionInput.value.trim();
  if (id === "") {
    formError.textContent = "enter a session id";
    return;
  }
  startSession(id);
});

const fromHash = window.location.hash.replace(/^#/, "");
if (fromHash !== "") startSession(fromHash);
redraw();

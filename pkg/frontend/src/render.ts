// HTML renderers for the two panels. Pure string functions over the view
// model: no DOM access, no network, and no numbers that did not come from a
// service document (the progress test enforces this).

import type { StateDoc } from "./api.js";
import { canSubmit, type ViewModel } from "./state.js";

export function escapeHtml(raw: string): string {
  return raw
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function phaseLabel(phase: string | null, classId: number | null): string {
  switch (phase) {
    case "seed":
      return "seed sampling";
    case "phase1":
      return classId === null ? "locating threshold" : `locating threshold: class ${classId}`;
    case "phase2":
      return classId === null
        ? "annotating near threshold"
        : `annotating near threshold: class ${classId}`;
    case "batch":
      return classId === null ? "strategy batch" : `strategy batch: class ${classId}`;
    case "train":
      return "retraining scorer";
    default:
      return "idle";
  }
}

function featurePreview(features: number[]): string {
  return features.map((x) => String(x)).join(", ");
}

export function renderBatch(vm: ViewModel, logUrl: string | null = null): string {
  const parts: string[] = [];
  if (vm.connection === "lost") {
    parts.push(
      `<div class="banner retry" data-banner="retry">connection lost, retrying` +
        (vm.error ? `: ${escapeHtml(vm.error)}` : "") +
        `</div>`,
    );
  } else if (vm.error !== null) {
    parts.push(
      `<div class="banner error" data-banner="error">${escapeHtml(vm.error)}</div>`,
    );
  }

  const batch = vm.batch;
  if (batch === null) {
    parts.push(`<p class="placeholder">waiting for a batch...</p>`);
    return parts.join("\n");
  }
  if (batch.status === "done" || batch.batch.length === 0) {
    parts.push(
      `<div class="banner done" data-banner="session-done">session complete` +
        (logUrl ? ` - <a href="${escapeHtml(logUrl)}" download>download log CSV</a>` : "") +
        `</div>`,
    );
    return parts.join("\n");
  }

  const k = batch.num_classes;
  parts.push(
    `<p class="batch-heading">round ${batch.round}, ${phaseLabel(batch.phase, batch.class_id)}` +
      ` (keys 1-${k} label the highlighted card)</p>`,
  );
  for (const item of batch.batch) {
    const chosen = vm.selections[item.id];
    const focus = vm.focusId === item.id ? " focused" : "";
    const payload =
      item.display !== undefined
        ? escapeHtml(item.display)
        : `features: ${featurePreview(item.features)}`;
    const buttons: string[] = [];
    for (let cls = 1; cls <= k; cls++) {
      const selected = chosen === cls ? " selected" : "";
      buttons.push(
        `<button type="button" class="class-btn${selected}" data-label-btn` +
          ` data-example="${item.id}" data-class="${cls}">class ${cls}</button>`,
      );
    }
    parts.push(
      `<div class="card${focus}" data-card="${item.id}">` +
        `<div class="payload">#${item.id} ${payload}</div>` +
        `<div class="choices">${buttons.join("")}</div>` +
        `</div>`,
    );
  }
  const armed = canSubmit(vm);
  const label = vm.submitting ? "submitting..." : "submit batch";
  parts.push(
    `<button type="button" class="submit" data-submit${armed ? "" : " disabled"}>` +
      `${label}</button>`,
  );
  return parts.join("\n");
}

function barRows(state: StateDoc): string {
  const max = Math.max(1, ...state.class_counts);
  const rows: string[] = [];
  state.class_counts.forEach((count, index) => {
    const classId = index + 1;
    const width = (100 * count) / max;
    const minority = classId === state.minority_class ? " minority" : "";
    rows.push(
      `<div class="bar-row${minority}" data-class-row="${classId}">` +
        `<span class="bar-name">class ${classId}</span>` +
        `<span class="bar" style="width:${width.toFixed(2)}%"></span>` +
        `<span class="bar-count" data-count="${classId}">${count}</span>` +
        `</div>`,
    );
  });
  return rows.join("\n");
}

function jHatRows(state: StateDoc): string {
  const keys = Object.keys(state.j_hat).sort((a, b) => Number(a) - Number(b));
  if (keys.length === 0) return "";
  const cells = keys.map(
    (key) => `<span data-jhat="${escapeHtml(key)}">class ${escapeHtml(key)}: ${state.j_hat[key]}</span>`,
  );
  return `<div class="jhat">threshold estimates (sorted-list positions): ${cells.join(" ")}</div>`;
}

export function renderProgress(state: StateDoc | null, logUrl: string | null = null): string {
  if (state === null) return `<p class="placeholder">no session</p>`;
  const parts: string[] = [];
  if (state.status === "done") {
    parts.push(
      `<div class="banner done" data-banner="complete">all rounds complete` +
        (logUrl ? ` - <a href="${escapeHtml(logUrl)}" download>download log CSV</a>` : "") +
        `</div>`,
    );
  }
  parts.push(
    `<p class="round-line">strategy ${escapeHtml(state.strategy)}, ` +
      (state.round === null
        ? `rounds completed ${state.rounds_completed} of ${state.rounds_total}`
        : `round ${state.round} of ${state.rounds_total}, ${phaseLabel(state.phase, state.class_id)}`) +
      `</p>`,
  );
  parts.push(
    `<p class="labels-line">labels ${state.labeled_total} of ${state.target_total}, ` +
      `pending ${state.pending_count}</p>`,
  );
  parts.push(`<div class="bars">${barRows(state)}</div>`);
  parts.push(
    `<p class="minority-line">minority class ${state.minority_class}, ` +
      `fraction ${state.minority_fraction}</p>`,
  );
  const jhat = jHatRows(state);
  if (jhat) parts.push(jhat);
  return parts.join("\n");
}

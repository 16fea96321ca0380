// Pure HTML renderers. Everything shown comes verbatim from the server;
// the only arithmetic here is layout (timing-bar proportions).

import type { ChatApiResponse, ExecutionTrace } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

const BRANCH_LABELS: Record<string, string> = {
  presenter: "Presenter",
  insight_generator: "Insight Generator",
  refused: "Refused",
};

export function renderBranchBadge(branch: string): string {
  const label = BRANCH_LABELS[branch] ?? branch;
  return `<span class="badge badge-${escapeHtml(branch)}" data-testid="branch-badge">${escapeHtml(label)}</span>`;
}

export function renderTrace(trace: ExecutionTrace): string {
  const parts: string[] = [];
  parts.push(
    `<div class="trace-gate" data-testid="gate-verdict">gate: ${escapeHtml(trace.gate_verdict)}` +
      ` (score ${escapeHtml(trace.gate_score.toFixed(4))})</div>`,
  );
  if (trace.route) {
    const confidence =
      trace.route_confidence === null ? "" : ` (${escapeHtml((trace.route_confidence * 100).toFixed(0))}%)`;
    parts.push(`<div class="trace-route">route: ${escapeHtml(trace.route)}${confidence}</div>`);
  }
  if (trace.scope_status === "out" && trace.scope_reason) {
    parts.push(`<div class="trace-scope">scope: out (${escapeHtml(trace.scope_reason)})</div>`);
  }
  if (trace.domain) {
    parts.push(`<div class="trace-domain">domain: ${escapeHtml(trace.domain)}</div>`);
  }
  parts.push(
    `<div class="trace-guardrail" data-testid="guardrail-status">guardrail: ${escapeHtml(trace.guardrail.status)}` +
      (trace.guardrail.reason ? ` (${escapeHtml(trace.guardrail.reason)})` : "") +
      `</div>`,
  );
  if (trace.plan && trace.plan.steps.length > 0) {
    const timings = new Map(trace.step_timings);
    const maxMs = Math.max(1, ...trace.step_timings.map(([, ms]) => ms));
    const rows = trace.plan.steps
      .map((step) => {
        const ms = timings.get(step.id) ?? 0;
        const width = Math.max(2, Math.round((ms / maxMs) * 100));
        return (
          `<li class="trace-step" data-testid="trace-step">` +
          `<code>${escapeHtml(step.id)}</code> ${escapeHtml(step.kind)} ` +
          `<strong>${escapeHtml(step.target)}</strong>` +
          `<span class="step-ms">${escapeHtml(String(ms))} ms</span>` +
          `<span class="step-bar" style="width:${width}%"></span>` +
          `</li>`
        );
      })
      .join("");
    parts.push(
      `<div class="trace-plan" data-testid="plan-panel"><div class="plan-title">plan` +
        ` (final: <code>${escapeHtml(trace.plan.final)}</code>)</div><ol>${rows}</ol></div>`,
    );
  }
  if (trace.cancelled_branch) {
    parts.push(
      `<div class="trace-cancelled">cancelled branch: ${escapeHtml(trace.cancelled_branch)}</div>`,
    );
  }
  if (trace.error_code) {
    parts.push(`<div class="trace-error">error code: ${escapeHtml(trace.error_code)}</div>`);
  }
  return `<div class="trace">${parts.join("")}</div>`;
}

export function renderTurn(query: string, response: ChatApiResponse): string {
  return (
    `<div class="turn" data-testid="turn">` +
    `<div class="turn-query">${escapeHtml(query)}</div>` +
    `<div class="turn-answer" data-testid="answer">${renderBranchBadge(response.branch)}` +
    `<p>${escapeHtml(response.answer)}</p>` +
    `<span class="latency" data-testid="latency">${escapeHtml(String(response.latency_ms))} ms</span>` +
    `</div>` +
    `<details class="trace-drawer" data-testid="trace-drawer"><summary>trace</summary>` +
    renderTrace(response.trace) +
    `</details>` +
    `</div>`
  );
}

export function renderErrorTurn(query: string, code: string, message: string): string {
  return (
    `<div class="turn turn-error" data-testid="turn">` +
    `<div class="turn-query">${escapeHtml(query)}</div>` +
    `<div class="turn-answer error" data-testid="error">[${escapeHtml(code)}] ${escapeHtml(message)}</div>` +
    `</div>`
  );
}

// Mirror of the chat service contract (docs/schemas.md in the repo root).

export type BranchName = "presenter" | "insight_generator" | "refused";

export interface PlanStep {
  id: string;
  kind: "api_call" | "function_call";
  target: string;
  payload: Record<string, unknown>;
  inputs: string[];
}

export interface Plan {
  steps: PlanStep[];
  final: string;
}

export interface GuardrailInfo {
  status: "pass" | "blocked";
  reason: string | null;
}

export interface ExecutionTrace {
  gate_verdict: "in_domain" | "out_of_domain";
  gate_score: number;
  route: BranchName | null;
  route_confidence: number | null;
  plan: Plan | null;
  planner_raw: string | null;
  step_timings: [string, number][];
  guardrail: GuardrailInfo;
  scope_status: string | null;
  scope_reason: string | null;
  domain: string | null;
  claims: [string, string, string][];
  cancelled_branch: string | null;
  error_code: string | null;
}

export interface ChatApiResponse {
  answer: string;
  branch: BranchName;
  trace: ExecutionTrace;
  latency_ms: number;
}

export interface ChatApiRequest {
  query: string;
  session_id: string;
  include_trace: boolean;
}

export interface ApiError {
  code: string;
  message?: string;
}

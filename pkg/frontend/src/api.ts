import type { ChatApiRequest, ChatApiResponse } from "./types.js";

export type FetchLike = (url: string, init: RequestInit) => Promise<Response>;

export class ChatApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

/**
 * POST one chat turn. The fetch implementation is injectable so contract
 * tests can run against a static mock of /v1/chat.
 */
export async function sendChat(
  baseUrl: string,
  request: ChatApiRequest,
  fetchImpl: FetchLike = fetch,
): Promise<ChatApiResponse> {
  let response: Response;
  try {
    response = await fetchImpl(`${baseUrl}/v1/chat`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(request),
    });
  } catch (err) {
    throw new ChatApiError(0, "NETWORK", `cannot reach the service: ${err}`);
  }
  let body: unknown;
  try {
    body = await response.json();
  } catch {
    throw new ChatApiError(response.status, "BAD_RESPONSE", "response was not JSON");
  }
  if (!response.ok) {
    const err = body as { code?: string; message?: string };
    throw new ChatApiError(
      response.status,
      err.code ?? "HTTP_ERROR",
      err.message ?? `service returned ${response.status}`,
    );
  }
  return body as ChatApiResponse;
}

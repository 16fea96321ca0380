import { ChatApiError, sendChat, type FetchLike } from "./api.js";
import { renderErrorTurn, renderTurn } from "./render.js";
import type { ChatApiResponse } from "./types.js";

export interface Turn {
  query: string;
  response: ChatApiResponse | null;
  html: string;
}

/**
 * One chat session: append-only turns, one request in flight at a time.
 * send() resolves to the rendered turn HTML either way; failures become
 * inline error turns rather than exceptions.
 */
export class UiSession {
  readonly sessionId: string;
  readonly turns: Turn[] = [];
  private inFlight = false;

  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch,
    sessionId?: string,
  ) {
    this.sessionId = sessionId ?? `ui-${Math.random().toString(36).slice(2, 10)}`;
  }

  get busy(): boolean {
    return this.inFlight;
  }

  async send(rawQuery: string): Promise<Turn> {
    const query = rawQuery.trim();
    if (!query) {
      throw new Error("query must be non-empty");
    }
    if (this.inFlight) {
      throw new Error("a request is already in flight for this session");
    }
    this.inFlight = true;
    try {
      const response = await sendChat(
        this.baseUrl,
        { query, session_id: this.sessionId, include_trace: true },
        this.fetchImpl,
      );
      const turn: Turn = { query, response, html: renderTurn(query, response) };
      this.turns.push(turn);
      return turn;
    } catch (err) {
      const code = err instanceof ChatApiError ? err.code : "UNEXPECTED";
      const message = err instanceof Error ? err.message : String(err);
      const turn: Turn = { query, response: null, html: renderErrorTurn(query, code, message) };
      this.turns.push(turn);
      return turn;
    } finally {
      this.inFlight = false;
    }
  }
}

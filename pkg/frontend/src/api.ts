import type { StateView } from './types.js';

export class GatewayError extends Error {
  constructor(public status: number, public code: string, message: string) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Thin typed wrapper over the session API; fetch is injectable for tests. */
export class GatewayClient {
  constructor(
    private baseUrl: string = '',
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    let resp: Response;
    try {
      resp = await this.fetchImpl(this.baseUrl + path, {
        method,
        headers: body === undefined ? undefined : { 'Content-Type': 'application/json' },
        body: body === undefined ? undefined : JSON.stringify(body),
      });
    } catch (err) {
      throw new GatewayError(0, 'network', String(err));
    }
    if (!resp.ok) {
      let code = 'http_error';
      let message = `${resp.status}`;
      try {
        const doc = await resp.json();
        code = doc.code ?? code;
        message = doc.message ?? JSON.stringify(doc);
      } catch {
        /* non-JSON error body */
      }
      throw new GatewayError(resp.status, code, message);
    }
    return (await resp.json()) as T;
  }

  listTasks(): Promise<{ tasks: string[] }> {
    return this.request('GET', '/tasks');
  }

  createSession(taskId: string, helper: string): Promise<StateView> {
    return this.request('POST', '/sessions', { task_id: taskId, helper });
  }

  getState(sessionId: string): Promise<StateView> {
    return this.request('GET', `/sessions/${sessionId}/state`);
  }

  move(sessionId: string, target: string): Promise<StateView> {
    return this.request('POST', `/sessions/${sessionId}/action`, { type: 'move', target });
  }

  stop(sessionId: string): Promise<StateView> {
    return this.request('POST', `/sessions/${sessionId}/action`, { type: 'stop' });
  }

  ask(sessionId: string, text: string, clientTurnId: string): Promise<StateView> {
    return this.request('POST', `/sessions/${sessionId}/ask`, {
      text,
      client_turn_id: clientTurnId,
    });
  }

  finish(sessionId: string, naturalness: number, faithfulness: number): Promise<StateView> {
    return this.request('POST', `/sessions/${sessionId}/finish`, {
      naturalness,
      faithfulness,
    });
  }
}

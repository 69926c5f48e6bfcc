import type { StateView } from './types.js';
import type { PendingAsk } from './viewmodel.js';

/** Client session state: the latest server view plus the local ask queue.
 *
 * The client holds no world knowledge: every field of `view` comes from the
 * gateway, and refreshing mid-episode reproduces the panel from GET /state.
 */
export interface AppState {
  view: StateView | null;
  pending: PendingAsk[];
  ratingsSubmitted: boolean;
  lastError: string | null;
}

export function initialState(): AppState {
  return { view: null, pending: [], ratingsSubmitted: false, lastError: null };
}

export function withView(state: AppState, view: StateView): AppState {
  return { ...state, view, lastError: null };
}

export function queueAsk(state: AppState, clientTurnId: string, text: string): AppState {
  return {
    ...state,
    pending: [...state.pending, { clientTurnId, text, state: 'pending' }],
  };
}

/** Successful ask: the turn now lives in the server view; drop the local copy. */
export function resolveAsk(state: AppState, clientTurnId: string, view: StateView): AppState {
  return {
    ...state,
    view,
    pending: state.pending.filter((p) => p.clientTurnId !== clientTurnId),
    lastError: null,
  };
}

export function failAsk(state: AppState, clientTurnId: string, message: string): AppState {
  return {
    ...state,
    pending: state.pending.map((p) =>
      p.clientTurnId === clientTurnId ? { ...p, state: 'failed' as const } : p,
    ),
    lastError: message,
  };
}

/** Retrying flips a failed entry back to pending; the turn id is reused so the
 * gateway deduplicates if the original request actually landed. */
export function retryAsk(state: AppState, clientTurnId: string): AppState {
  return {
    ...state,
    pending: state.pending.map((p) =>
      p.clientTurnId === clientTurnId ? { ...p, state: 'pending' as const } : p,
    ),
  };
}

export function markRatingsSubmitted(state: AppState): AppState {
  return { ...state, ratingsSubmitted: true };
}

export function withError(state: AppState, message: string): AppState {
  return { ...state, lastError: message };
}

import { GatewayClient, GatewayError } from './api.js';
import { mapKey } from './keyboard.js';
import {
  AppState,
  failAsk,
  initialState,
  markRatingsSubmitted,
  queueAsk,
  resolveAsk,
  retryAsk,
  withError,
  withView,
} from './state.js';
import { render, renderLobby } from './ui.js';

const client = new GatewayClient('');
const root = document.getElementById('app') as HTMLElement;
let state: AppState = initialState();

function sessionIdFromHash(): string | null {
  const match = window.location.hash.match(/#s=(\w+)/);
  return match ? match[1] : null;
}

function draw(): void {
  if (!state.view) return;
  render(root, state.view, state.pending, state.ratingsSubmitted,
         state.lastError, handlers);
}

async function refresh(sessionId: string): Promise<void> {
  state = withView(state, await client.getState(sessionId));
  draw();
}

const handlers = {
  async onMove(target: string) {
    if (!state.view) return;
    try {
      state = withView(state, await client.move(state.view.session_id, target));
    } catch (err) {
      state = withError(state, err instanceof GatewayError ? err.message : String(err));
    }
    draw();
  },
  async onStop() {
    if (!state.view) return;
    try {
      state = withView(state, await client.stop(state.view.session_id));
    } catch (err) {
      state = withError(state, err instanceof GatewayError ? err.message : String(err));
    }
    draw();
  },
  async onAsk(text: string) {
    if (!state.view) return;
    const clientTurnId = `t${Date.now()}-${Math.floor(Math.random() * 1e6)}`;
    state = queueAsk(state, clientTurnId, text);
    draw();
    await sendAsk(clientTurnId, text);
  },
  async onRetry(clientTurnId: string) {
    const entry = state.pending.find((p) => p.clientTurnId === clientTurnId);
    if (!entry) return;
    state = retryAsk(state, clientTurnId);
    draw();
    await sendAsk(clientTurnId, entry.text);
  },
  async onFinish(naturalness: number, faithfulness: number) {
    if (!state.view) return;
    try {
      const view = await client.finish(state.view.session_id, naturalness, faithfulness);
      state = markRatingsSubmitted(withView(state, view));
    } catch (err) {
      state = withError(state, err instanceof GatewayError ? err.message : String(err));
    }
    draw();
  },
};

async function sendAsk(clientTurnId: string, text: string): Promise<void> {
  if (!state.view) return;
  try {
    const view = await client.ask(state.view.session_id, text, clientTurnId);
    state = resolveAsk(state, clientTurnId, view);
  } catch (err) {
    state = failAsk(state, clientTurnId,
                    err instanceof GatewayError ? err.message : String(err));
  }
  draw();
}

document.addEventListener('keydown', (event) => {
  if (!state.view) return;
  const typing = document.activeElement instanceof HTMLInputElement
    || document.activeElement instanceof HTMLTextAreaElement;
  const action = mapKey(event.key, state.view.neighbors.length,
                        state.view.status === 'active', typing);
  if (!action) return;
  event.preventDefault();
  if (action.kind === 'move') {
    handlers.onMove(state.view.neighbors[action.index].node);
  } else if (action.kind === 'stop') {
    handlers.onStop();
  } else {
    document.getElementById('chat-input')?.focus();
  }
});

async function boot(): Promise<void> {
  const existing = sessionIdFromHash();
  if (existing) {
    try {
      await refresh(existing);
      return;
    } catch {
      window.location.hash = '';
    }
  }
  const { tasks } = await client.listTasks();
  renderLobby(root, tasks, async (taskId, helper) => {
    try {
      const view = await client.createSession(taskId, helper);
      window.location.hash = `#s=${view.session_id}`;
      state = withView(state, view);
      draw();
    } catch (err) {
      root.appendChild(document.createTextNode(
        `failed to create session: ${err instanceof GatewayError ? err.message : err}`));
    }
  });
}

boot();

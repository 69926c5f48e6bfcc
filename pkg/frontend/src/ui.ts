import type { StateView } from './types.js';
import type { PendingAsk } from './viewmodel.js';
import { controls, summaryLine, transcript } from './viewmodel.js';

export interface Handlers {
  onMove(target: string): void;
  onStop(): void;
  onAsk(text: string): void;
  onRetry(clientTurnId: string): void;
  onFinish(naturalness: number, faithfulness: number): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K, cls?: string, text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function render(root: HTMLElement, view: StateView, pending: PendingAsk[],
                       ratingsSubmitted: boolean, lastError: string | null,
                       handlers: Handlers): void {
  root.textContent = '';

  const header = el('div', 'header');
  header.appendChild(el('h2', undefined, `Find the ${view.target}`));
  header.appendChild(el('div', 'status',
    `You are in the ${view.current_room} | status: ${view.status} | ` +
    `moves: ${view.steps_taken} | traveled: ${view.distance_traveled.toFixed(1)} m`));
  root.appendChild(header);

  if (lastError) {
    const banner = el('div', 'error-banner', `Request failed: ${lastError}`);
    root.appendChild(banner);
  }

  const movement = el('div', 'movement');
  movement.appendChild(el('h3', undefined, 'Movement'));
  for (const control of controls(view)) {
    const button = el('button', control.kind === 'stop' ? 'stop' : 'move');
    if (control.kind === 'move') {
      button.textContent = `[${control.key}] go to the ${control.label}`;
      button.dataset.target = control.target;
      button.onclick = () => handlers.onMove(control.target);
    } else {
      button.textContent = '[s] stop here';
      button.onclick = () => handlers.onStop();
    }
    button.disabled = !control.enabled;
    movement.appendChild(button);
  }
  root.appendChild(movement);

  const chat = el('div', 'chat');
  chat.appendChild(el('h3', undefined, 'Helper chat'));
  const log = el('div', 'chat-log');
  for (const entry of transcript(view, pending)) {
    const q = el('div', 'chat-q', `you: ${entry.inquiry}`);
    log.appendChild(q);
    if (entry.response !== null) {
      log.appendChild(el('div', 'chat-r', `helper: ${entry.response}`));
    } else if (entry.failed) {
      const failed = el('div', 'chat-failed', 'failed to send ');
      const retry = el('button', 'retry', 'retry');
      retry.onclick = () => handlers.onRetry(entry.clientTurnId!);
      failed.appendChild(retry);
      log.appendChild(failed);
    } else {
      log.appendChild(el('div', 'chat-pending', 'helper is thinking...'));
    }
  }
  chat.appendChild(log);

  const form = el('div', 'chat-form');
  const input = el('input');
  input.id = 'chat-input';
  input.placeholder = 'ask the helper... ( / to focus )';
  input.disabled = view.status !== 'active';
  const send = el('button', 'send', 'ask');
  send.disabled = view.status !== 'active';
  const submit = () => {
    const text = input.value.trim();
    if (!text) return; // empty input blocked client-side
    input.value = '';
    handlers.onAsk(text);
  };
  send.onclick = submit;
  input.onkeydown = (e) => {
    if (e.key === 'Enter') submit();
  };
  form.appendChild(input);
  form.appendChild(send);
  chat.appendChild(form);
  root.appendChild(chat);

  const summary = summaryLine(view);
  if (summary) {
    root.appendChild(el('div', 'metrics', summary));
  }

  if (view.status === 'stopped' && !ratingsSubmitted) {
    root.appendChild(renderRatings(handlers));
  }
  if (view.status === 'finished' || ratingsSubmitted) {
    root.appendChild(el('div', 'done', 'Session finished. Thanks for the ratings!'));
  }
}

function renderRatings(handlers: Handlers): HTMLElement {
  const panel = el('div', 'ratings');
  panel.appendChild(el('h3', undefined, 'Rate the helper'));
  const sliders: Record<string, HTMLInputElement> = {};
  for (const name of ['naturalness', 'faithfulness']) {
    const row = el('div', 'rating-row');
    row.appendChild(el('label', undefined, name));
    const slider = el('input');
    slider.type = 'range';
    slider.min = '0';
    slider.max = '1';
    slider.step = '0.01';
    slider.value = '0.5';
    slider.id = `rating-${name}`;
    sliders[name] = slider;
    row.appendChild(slider);
    panel.appendChild(row);
  }
  const submit = el('button', 'finish', 'submit ratings');
  submit.onclick = () => {
    submit.disabled = true; // double-submit suppressed
    handlers.onFinish(Number(sliders.naturalness.value), Number(sliders.faithfulness.value));
  };
  panel.appendChild(submit);
  return panel;
}

export function renderLobby(root: HTMLElement, tasks: string[],
                            onCreate: (taskId: string, helper: string) => void): void {
  root.textContent = '';
  const panel = el('div', 'lobby');
  panel.appendChild(el('h2', undefined, 'Start a navigation session'));
  const taskSelect = el('select');
  taskSelect.id = 'task-select';
  for (const id of tasks) {
    const option = el('option', undefined, id);
    option.value = id;
    taskSelect.appendChild(option);
  }
  const helperSelect = el('select');
  helperSelect.id = 'helper-select';
  for (const h of ['oracle', 'model', 'echo', 'empty']) {
    const option = el('option', undefined, h);
    option.value = h;
    helperSelect.appendChild(option);
  }
  const start = el('button', 'start', 'start session');
  start.onclick = () => onCreate(taskSelect.value, helperSelect.value);
  panel.appendChild(taskSelect);
  panel.appendChild(helperSelect);
  panel.appendChild(start);
  root.appendChild(panel);
}

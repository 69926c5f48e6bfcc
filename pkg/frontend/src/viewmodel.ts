import type { DialogEntry, StateView } from './types.js';

export interface MoveControl {
  kind: 'move';
  key: string; // keyboard shortcut, '1'..'9'
  target: string;
  label: string;
  enabled: boolean;
}

export interface StopControl {
  kind: 'stop';
  key: 's';
  enabled: boolean;
}

export type Control = MoveControl | StopControl;

/** Pending or failed chat entries living only on the client. */
export interface PendingAsk {
  clientTurnId: string;
  text: string;
  state: 'pending' | 'failed';
}

export interface TranscriptEntry {
  inquiry: string;
  response: string | null; // null while pending
  failed: boolean;
  clientTurnId?: string;
}

/** Exactly one control per legal move plus stop; all disabled once not active. */
export function controls(view: StateView): Control[] {
  const active = view.status === 'active';
  const moves: Control[] = view.neighbors.map((nb, i) => ({
    kind: 'move',
    key: String(i + 1),
    target: nb.node,
    label: `${nb.room} (${nb.direction}, ${nb.distance.toFixed(1)} m)`,
    enabled: active && i < 9,
  }));
  moves.push({ kind: 'stop', key: 's', enabled: active });
  return moves;
}

/** Server turns in order, then client-side pending/failed asks. */
export function transcript(view: StateView, pending: PendingAsk[]): TranscriptEntry[] {
  const entries: TranscriptEntry[] = view.dialog.map((t: DialogEntry) => ({
    inquiry: t.inquiry,
    response: t.response,
    failed: false,
  }));
  for (const p of pending) {
    entries.push({
      inquiry: p.text,
      response: null,
      failed: p.state === 'failed',
      clientTurnId: p.clientTurnId,
    });
  }
  return entries;
}

export function canAsk(view: StateView, text: string): boolean {
  return view.status === 'active' && text.trim().length > 0;
}

export function showRatings(view: StateView): boolean {
  return view.status === 'stopped';
}

export function summaryLine(view: StateView): string | null {
  if (!view.metrics) return null;
  const m = view.metrics;
  return `GP ${m.gp.toFixed(3)} m | success ${m.success ? 'yes' : 'no'} | SPL ${m.spl.toFixed(3)}`;
}

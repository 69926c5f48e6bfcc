export type KeyAction =
  | { kind: 'move'; index: number }
  | { kind: 'stop' }
  | { kind: 'focus-chat' }
  | null;

/** Digits move via the numbered neighbor buttons, "s" stops, "/" focuses chat.
 * Keys are ignored while typing in an input or when the episode is not active. */
export function mapKey(key: string, neighborCount: number, active: boolean,
                       typing: boolean): KeyAction {
  if (typing) return null;
  if (key === '/') return { kind: 'focus-chat' };
  if (!active) return null;
  if (key === 's' || key === 'S') return { kind: 'stop' };
  if (/^[1-9]$/.test(key)) {
    const index = Number(key) - 1;
    return index < neighborCount ? { kind: 'move', index } : null;
  }
  return null;
}

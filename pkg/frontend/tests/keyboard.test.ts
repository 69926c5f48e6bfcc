import { describe, expect, it } from 'vitest';
import { mapKey } from '../src/keyboard.js';

describe('mapKey', () => {
  it('maps digits to neighbor indices within range', () => {
    expect(mapKey('1', 3, true, false)).toEqual({ kind: 'move', index: 0 });
    expect(mapKey('3', 3, true, false)).toEqual({ kind: 'move', index: 2 });
    expect(mapKey('4', 3, true, false)).toBeNull();
  });

  it('maps s to stop and / to chat focus', () => {
    expect(mapKey('s', 2, true, false)).toEqual({ kind: 'stop' });
    expect(mapKey('S', 2, true, false)).toEqual({ kind: 'stop' });
    expect(mapKey('/', 2, true, false)).toEqual({ kind: 'focus-chat' });
  });

  it('ignores movement keys while typing or after the episode ends', () => {
    expect(mapKey('1', 3, true, true)).toBeNull();
    expect(mapKey('s', 3, false, false)).toBeNull();
    expect(mapKey('/', 3, false, false)).toEqual({ kind: 'focus-chat' });
  });

  it('ignores unrelated keys', () => {
    expect(mapKey('x', 3, true, false)).toBeNull();
    expect(mapKey('0', 3, true, false)).toBeNull();
  });
});

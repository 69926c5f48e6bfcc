import { describe, expect, it } from 'vitest';
import { GatewayClient, GatewayError } from '../src/api.js';

interface Call {
  url: string;
  method?: string;
  body?: string;
}

function fakeFetch(respond: (call: Call) => { status: number; body: unknown }) {
  const calls: Call[] = [];
  const impl = async (url: string, init?: RequestInit): Promise<Response> => {
    const call = { url, method: init?.method, body: init?.body as string };
    calls.push(call);
    const { status, body } = respond(call);
    return new Response(JSON.stringify(body), {
      status,
      headers: { 'Content-Type': 'application/json' },
    });
  };
  return { calls, impl };
}

describe('GatewayClient', () => {
  it('issues exactly one request per user action', async () => {
    const { calls, impl } = fakeFetch(() => ({ status: 200, body: { ok: true } }));
    const client = new GatewayClient('http://gw', impl);
    await client.getState('s1');
    await client.move('s1', 'n2');
    await client.stop('s1');
    expect(calls).toHaveLength(3);
    expect(calls[0]).toMatchObject({ url: 'http://gw/sessions/s1/state' });
    expect(JSON.parse(calls[1].body!)).toEqual({ type: 'move', target: 'n2' });
    expect(JSON.parse(calls[2].body!)).toEqual({ type: 'stop' });
  });

  it('sends ratings as numbers in [0, 1]', async () => {
    const { calls, impl } = fakeFetch(() => ({ status: 200, body: {} }));
    const client = new GatewayClient('', impl);
    await client.finish('s1', 1, 1);
    expect(JSON.parse(calls[0].body!)).toEqual({ naturalness: 1.0, faithfulness: 1.0 });
  });

  it('carries the dedupe token on asks', async () => {
    const { calls, impl } = fakeFetch(() => ({ status: 200, body: {} }));
    const client = new GatewayClient('', impl);
    await client.ask('s1', 'where?', 'turn-7');
    expect(JSON.parse(calls[0].body!)).toEqual({ text: 'where?', client_turn_id: 'turn-7' });
  });

  it('surfaces structured server errors', async () => {
    const { impl } = fakeFetch(() => ({
      status: 409,
      body: { code: 'finished', message: 'session already finished' },
    }));
    const client = new GatewayClient('', impl);
    const err = await client.finish('s1', 0.5, 0.5).catch((e) => e);
    expect(err).toBeInstanceOf(GatewayError);
    expect(err.status).toBe(409);
    expect(err.code).toBe('finished');
  });

  it('maps network failures to a retryable error', async () => {
    const client = new GatewayClient('', async () => {
      throw new TypeError('fetch failed');
    });
    const err = await client.ask('s1', 'hi', 'id').catch((e) => e);
    expect(err).toBeInstanceOf(GatewayError);
    expect(err.code).toBe('network');
  });
});

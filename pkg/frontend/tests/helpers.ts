/** Recorded-fixture fetch for contract tests: no network, real bodies. */

import { readFileSync } from 'node:fs';

import type { FetchLike } from '../src/api.js';

export interface RecordedResponse {
  status: number;
  body: unknown;
}

export function loadFixture(name: string): RecordedResponse {
  const url = new URL(`../fixtures/${name}`, import.meta.url);
  return JSON.parse(readFileSync(url, 'utf-8')) as RecordedResponse;
}

export interface RecordedCall {
  url: string;
  init?: RequestInit;
}

/**
 * Builds a fetch that answers from fixtures; routes map URL substrings to
 * fixture file names, matched in insertion order.
 */
export function fixtureFetch(routes: Record<string, string>): {
  fetchFn: FetchLike;
  calls: RecordedCall[];
} {
  const calls: RecordedCall[] = [];
  const fetchFn: FetchLike = async (url, init) => {
    calls.push({ url, init });
    const match = Object.keys(routes).find((fragment) => url.includes(fragment));
    if (!match) {
      throw new Error(`no fixture routed for ${url}`);
    }
    const { status, body } = loadFixture(routes[match]!);
    return new Response(JSON.stringify(body), {
      status,
      headers: { 'Content-Type': 'application/json' },
    });
  };
  return { fetchFn, calls };
}

import { afterEach, beforeEach, describe, expect, test, vi } from "vitest";

import { RateLimiter } from "../src/throttle.js";

describe("rate limiter", () => {
  beforeEach(() => {
    vi.useFakeTimers();
  });
  afterEach(() => {
    vi.useRealTimers();
  });

  test("first push in an idle window emits immediately", () => {
    const seen: number[] = [];
    const limiter = new RateLimiter<number>(34, (v) => seen.push(v));
    limiter.push(1);
    expect(seen).toEqual([1]);
  });

  test("a one-second drag emits at most thirty messages", () => {
    const seen: number[] = [];
    const limiter = new RateLimiter<number>(Math.ceil(1000 / 30), (v) => seen.push(v));
    // Pointer events every 5 ms for one second: 200 pushes.
    for (let i = 0; i < 200; i += 1) {
      limiter.push(i);
      vi.advanceTimersByTime(5);
    }
    expect(seen.length).toBeLessThanOrEqual(30);
    expect(seen.length).toBeGreaterThan(20);
  });

  test("the trailing value always lands", () => {
    const seen: number[] = [];
    const limiter = new RateLimiter<number>(34, (v) => seen.push(v));
    limiter.push(1);
    limiter.push(2);
    limiter.push(3);
    expect(seen).toEqual([1]);
    vi.advanceTimersByTime(40);
    expect(seen).toEqual([1, 3]);
  });

  test("dispose cancels the trailing emission", () => {
    const seen: number[] = [];
    const limiter = new RateLimiter<number>(34, (v) => seen.push(v));
    limiter.push(1);
    limiter.push(2);
    limiter.dispose();
    vi.advanceTimersByTime(100);
    expect(seen).toEqual([1]);
  });
});

/**
 * Trailing-edge rate limiter.
 *
 * The first push in an idle window emits immediately; pushes arriving
 * faster than the interval collapse to one trailing emission carrying
 * the latest value, so the final state of a drag always lands while the
 * wire sees at most one message per interval.
 */

export class RateLimiter<T> {
  private last = Number.NEGATIVE_INFINITY;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private pending: T | null = null;

  constructor(
    private readonly minIntervalMs: number,
    private readonly emit: (value: T) => void,
  ) {}

  push(value: T): void {
    const now = Date.now();
    if (this.timer === null && now - this.last >= this.minIntervalMs) {
      this.last = now;
      this.emit(value);
      return;
    }
    this.pending = value;
    if (this.timer === null) {
      const wait = Math.max(0, this.minIntervalMs - (now - this.last));
      this.timer = setTimeout(() => {
        this.timer = null;
        this.last = Date.now();
        const queued = this.pending as T;
        this.pending = null;
        this.emit(queued);
      }, wait);
    }
  }

  dispose(): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    this.pending = null;
  }
}

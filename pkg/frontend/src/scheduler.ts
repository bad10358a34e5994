// Debounced latest-wins request scheduling: slider drags and rapid clicks
// collapse to one request after the debounce window, at most one request is
// ever in flight, and completing tasks can ask whether they are still the
// newest before touching the screen.

export type Task = (isCurrent: () => boolean) => Promise<void>;

export class RenderScheduler {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private running = false;
  private queued: { task: Task; gen: number } | null = null;
  private gen = 0;

  constructor(private readonly delayMs: number = 120) {}

  /** Schedule a task, replacing anything not yet started. */
  request(task: Task): void {
    this.gen += 1;
    const gen = this.gen;
    if (this.timer !== null) {
      clearTimeout(this.timer);
    }
    this.timer = setTimeout(() => {
      this.timer = null;
      this.enqueue(task, gen);
    }, this.delayMs);
  }

  /** True when nothing is pending, queued, or in flight. */
  idle(): boolean {
    return this.timer === null && !this.running && this.queued === null;
  }

  private enqueue(task: Task, gen: number): void {
    if (this.running) {
      this.queued = { task, gen };
      return;
    }
    void this.run(task, gen);
  }

  private async run(task: Task, gen: number): Promise<void> {
    this.running = true;
    try {
      await task(() => gen === this.gen);
    } catch {
      // tasks own their error reporting; a failed render must never stall
      // the queue or surface as an unhandled rejection
    } finally {
      this.running = false;
      if (this.queued !== null) {
        const next = this.queued;
        this.queued = null;
        void this.run(next.task, next.gen);
      }
    }
  }
}

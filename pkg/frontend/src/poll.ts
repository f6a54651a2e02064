// Overlapping poll replies are resolved by sequence number: a reply is
// applied only if no newer request already finished. The UI therefore never
// steps backward when the network reorders responses.

export class LatestWins {
  private issued = 0;
  private applied = 0;

  /** Take a ticket before starting a request. */
  begin(): number {
    return ++this.issued;
  }

  /** True if the reply for this ticket is still the newest one seen. */
  accept(ticket: number): boolean {
    if (ticket <= this.applied) return false;
    this.applied = ticket;
    return true;
  }
}

export interface PollHandle {
  stop(): void;
}

/**
 * Call `tick` every `intervalMs`, skipping beats while one is in flight.
 * Errors from `tick` go to `onError` and polling continues.
 */
export function startPolling(
  tick: () => Promise<void>,
  intervalMs: number,
  onError: (error: unknown) => void = () => {},
): PollHandle {
  let busy = false;
  let stopped = false;
  const run = async () => {
    if (busy || stopped) return;
    busy = true;
    try {
      await tick();
    } catch (error) {
      if (!stopped) onError(error);
    } finally {
      busy = false;
    }
  };
  void run();
  const timer = setInterval(run, intervalMs);
  return {
    stop() {
      stopped = true;
      clearInterval(timer);
    },
  };
}

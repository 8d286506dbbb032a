/** Review-queue workflow: page through flagged calls in ascending
 * confidence, label or skip, survive version conflicts by refreshing. */

import { ApiClient, ApiError } from "./api.js";
import type { CallRecordDto } from "./types.js";
import { callId } from "./types.js";

export interface QueueEvents {
  onChanged: () => void;
  onConflict: (message: string) => void;
}

export class ReviewQueue {
  items: CallRecordDto[] = [];
  total = 0;
  cursor = 0;
  annotator = "reviewer";

  constructor(
    private readonly api: ApiClient,
    private readonly events: QueueEvents,
    private readonly pageSize = 50,
  ) {}

  async refresh(): Promise<void> {
    const page = await this.api.review("Flagged", 0, this.pageSize);
    // server returns ascending confidence; keep that order
    this.items = page.items;
    this.total = page.total;
    this.cursor = Math.min(this.cursor, Math.max(this.items.length - 1, 0));
    this.events.onChanged();
  }

  current(): CallRecordDto | null {
    return this.items[this.cursor] ?? null;
  }

  skip(): void {
    if (this.items.length === 0) {
      return;
    }
    this.cursor = (this.cursor + 1) % this.items.length;
    this.events.onChanged();
  }

  /** Label the current call; on success it leaves the flagged queue. */
  async labelCurrent(callClass: string): Promise<void> {
    const record = this.current();
    if (!record) {
      return;
    }
    try {
      await this.api.label(callId(record), callClass, this.annotator, record.version);
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        this.events.onConflict(error.message);
        await this.refresh();
        return;
      }
      throw error;
    }
    this.items = this.items.filter((item) => callId(item) !== callId(record));
    this.total = Math.max(0, this.total - 1);
    this.cursor = Math.min(this.cursor, Math.max(this.items.length - 1, 0));
    this.events.onChanged();
  }

  confidences(): number[] {
    return this.items.map((item) => item.confidence ?? 2.0);
  }
}

/**
 * Job polling: 1 s cadence with exponential backoff, independent per job.
 */

import type { EngineApi, Job } from "./api.js";

export interface PollOptions {
  intervalMs?: number;
  backoffFactor?: number;
  maxIntervalMs?: number;
  onUpdate?: (job: Job) => void;
}

const sleep = (ms: number) => new Promise((resolve) => setTimeout(resolve, ms));

/** Resolves when the job reaches `done`; rejects with the job error on `failed`. */
export async function pollJob(
  api: EngineApi,
  jobId: string,
  options: PollOptions = {},
): Promise<Job> {
  const backoff = options.backoffFactor ?? 1.5;
  const maxInterval = options.maxIntervalMs ?? 10_000;
  let interval = options.intervalMs ?? 1_000;
  for (;;) {
    const job = await api.getJob(jobId);
    options.onUpdate?.(job);
    if (job.state === "done") return job;
    if (job.state === "failed") {
      throw new Error(job.error ?? `job ${jobId} failed`);
    }
    await sleep(interval);
    interval = Math.min(interval * backoff, maxInterval);
  }
}

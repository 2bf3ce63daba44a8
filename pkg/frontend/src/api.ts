/**
 * Typed client for the /api/v1 surface. All session data flows through these
 * endpoints; the console never computes verdicts or filters plans itself.
 */

import type {
  ApiErrorBody,
  ManualSubmission,
  PendingEntry,
  PlanDocument,
  ProtocolDocument,
  ReportDocument,
  SessionSummary,
} from './types.js';
import { readSseStream, type SseEvent } from './sse.js';

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

async function throwApiError(response: Response): Promise<never> {
  let body: ApiErrorBody | null = null;
  try {
    body = (await response.json()) as ApiErrorBody;
  } catch {
    // non-JSON error body; fall through to a generic error
  }
  throw new ApiError(
    response.status,
    body?.code ?? 'HTTP_ERROR',
    body?.message ?? `request failed with status ${response.status}`,
  );
}

export class ApiClient {
  constructor(readonly base: string = '') {}

  private url(path: string): string {
    return `${this.base}/api/v1${path}`;
  }

  private async getJson<T>(path: string): Promise<T> {
    const response = await fetch(this.url(path));
    if (!response.ok) {
      await throwApiError(response);
    }
    return (await response.json()) as T;
  }

  async listSessions(): Promise<SessionSummary[]> {
    const body = await this.getJson<{ sessions: SessionSummary[] }>('/sessions');
    return body.sessions;
  }

  async createSession(documents: {
    device: Blob;
    profile: Blob;
    catalog: Blob;
    plan: Blob;
  }): Promise<string> {
    const form = new FormData();
    form.append('device', documents.device, 'device.json');
    form.append('profile', documents.profile, 'profile.json');
    form.append('catalog', documents.catalog, 'catalog.json');
    form.append('plan', documents.plan, 'plan.json');
    const response = await fetch(this.url('/sessions'), { method: 'POST', body: form });
    if (!response.ok) {
      await throwApiError(response);
    }
    const body = (await response.json()) as { 'session-id': string };
    return body['session-id'];
  }

  getSession(sessionId: string): Promise<SessionSummary> {
    return this.getJson(`/sessions/${sessionId}`);
  }

  getPlan(sessionId: string): Promise<PlanDocument> {
    return this.getJson(`/sessions/${sessionId}/plan`);
  }

  async pendingManual(sessionId: string): Promise<PendingEntry[]> {
    const body = await this.getJson<{ pending: PendingEntry[] }>(
      `/sessions/${sessionId}/pending-manual`,
    );
    return body.pending;
  }

  /**
   * Run all pending automated entries; resolves when the stream ends.
   * Protocol events arrive in canonical plan order.
   */
  async executeAutomated(
    sessionId: string,
    onEvent: (event: SseEvent) => void,
  ): Promise<void> {
    const response = await fetch(this.url(`/sessions/${sessionId}/execute-automated`), {
      method: 'POST',
    });
    if (!response.ok) {
      await throwApiError(response);
    }
    if (!response.body) {
      throw new ApiError(0, 'NO_STREAM', 'response carried no body stream');
    }
    await readSseStream(response.body, onEvent);
  }

  async submitManualResult(
    sessionId: string,
    submission: ManualSubmission,
  ): Promise<ProtocolDocument> {
    const response = await fetch(this.url(`/sessions/${sessionId}/manual-results`), {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(submission),
    });
    if (!response.ok) {
      await throwApiError(response);
    }
    return (await response.json()) as ProtocolDocument;
  }

  async assess(sessionId: string, schemeId: string): Promise<ReportDocument> {
    const response = await fetch(
      this.url(`/sessions/${sessionId}/assess?scheme-id=${encodeURIComponent(schemeId)}`),
      { method: 'POST' },
    );
    if (!response.ok) {
      await throwApiError(response);
    }
    return (await response.json()) as ReportDocument;
  }

  getReport(sessionId: string): Promise<ReportDocument> {
    return this.getJson(`/sessions/${sessionId}/report?format=machine`);
  }
}

/**
 * Incremental server-sent-events parser over a fetch response body.
 *
 * The console cannot use EventSource for POST endpoints, so execution
 * progress is read from the response stream and parsed here. Handles events
 * split across chunks and both LF and CRLF framing.
 */

export interface SseEvent {
  event: string;
  data: string;
}

export class SseParser {
  private buffer = '';
  private eventName = 'message';
  private dataLines: string[] = [];

  /** Feed one chunk of text; returns the events completed by it. */
  push(chunk: string): SseEvent[] {
    this.buffer += chunk;
    const events: SseEvent[] = [];
    for (;;) {
      const newline = this.buffer.indexOf('\n');
      if (newline < 0) {
        break;
      }
      let line = this.buffer.slice(0, newline);
      this.buffer = this.buffer.slice(newline + 1);
      if (line.endsWith('\r')) {
        line = line.slice(0, -1);
      }
      const event = this.consumeLine(line);
      if (event) {
        events.push(event);
      }
    }
    return events;
  }

  private consumeLine(line: string): SseEvent | null {
    if (line === '') {
      if (this.dataLines.length === 0) {
        this.eventName = 'message';
        return null;
      }
      const event = { event: this.eventName, data: this.dataLines.join('\n') };
      this.eventName = 'message';
      this.dataLines = [];
      return event;
    }
    if (line.startsWith(':')) {
      return null; // comment / keep-alive
    }
    const colon = line.indexOf(':');
    const field = colon < 0 ? line : line.slice(0, colon);
    let value = colon < 0 ? '' : line.slice(colon + 1);
    if (value.startsWith(' ')) {
      value = value.slice(1);
    }
    if (field === 'event') {
      this.eventName = value;
    } else if (field === 'data') {
      this.dataLines.push(value);
    }
    return null;
  }
}

/** Consume a streaming body, invoking the callback per completed event. */
export async function readSseStream(
  body: ReadableStream<Uint8Array>,
  onEvent: (event: SseEvent) => void,
): Promise<void> {
  const parser = new SseParser();
  const decoder = new TextDecoder();
  const reader = body.getReader();
  for (;;) {
    const { done, value } = await reader.read();
    if (done) {
      break;
    }
    for (const event of parser.push(decoder.decode(value, { stream: true }))) {
      onEvent(event);
    }
  }
  for (const event of parser.push(decoder.decode())) {
    onEvent(event);
  }
}

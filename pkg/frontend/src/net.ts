// Websocket link with capped-backoff reconnect.

import { decodeServerFrame, ServerFrame } from "./protocol.js";

export interface Link {
  send(text: string): void;
  close(): void;
}

export function connect(
  url: string,
  onFrame: (frame: ServerFrame) => void,
  onStatus: (connected: boolean) => void,
): Link {
  let ws: WebSocket | null = null;
  let closed = false;
  let retryMs = 500;

  const open = () => {
    ws = new WebSocket(url);
    ws.onopen = () => {
      retryMs = 500;
      onStatus(true);
    };
    ws.onmessage = (ev) => {
      const frame = decodeServerFrame(String(ev.data));
      if (frame) onFrame(frame);
    };
    ws.onclose = () => {
      onStatus(false);
      if (!closed) {
        setTimeout(open, retryMs);
        retryMs = Math.min(retryMs * 2, 8000);
      }
    };
    ws.onerror = () => {
      // onclose handles the retry
    };
  };
  open();

  return {
    send(text: string) {
      if (ws && ws.readyState === WebSocket.OPEN) ws.send(text);
    },
    close() {
      closed = true;
      ws?.close();
    },
  };
}

export function defaultWsUrl(): string {
  const proto = location.protocol === "https:" ? "wss:" : "ws:";
  return `${proto}//${location.host}/ws`;
}

/** Live frame stream: a WebSocket pushing binary PGM frames.
 *
 * The socket factory is injectable so the reconnect and staleness logic is
 * testable without a browser.
 */

import { DecodedFrame, decodePgm } from "./pgm.js";

export interface SocketLike {
  binaryType: string;
  onmessage: ((event: { data: ArrayBuffer }) => void) | null;
  onclose: (() => void) | null;
  onerror: ((event: unknown) => void) | null;
  close(): void;
}

export type SocketFactory = (url: string) => SocketLike;

export interface StreamCallbacks {
  onFrame: (frame: DecodedFrame) => void;
  onClose?: () => void;
}

export class FrameStream {
  private socket: SocketLike | null = null;

  constructor(
    private makeSocket: SocketFactory = (url) => new WebSocket(url) as unknown as SocketLike,
  ) {}

  open(url: string, callbacks: StreamCallbacks): void {
    this.close();
    const socket = this.makeSocket(url);
    socket.binaryType = "arraybuffer";
    socket.onmessage = (event) => {
      if (typeof event.data === "string") return; // ignore text chatter
      try {
        callbacks.onFrame(decodePgm(event.data));
      } catch {
        // a malformed frame is dropped, the stream keeps going
      }
    };
    socket.onclose = () => {
      if (this.socket === socket) this.socket = null;
      callbacks.onClose?.();
    };
    socket.onerror = () => socket.close();
    this.socket = socket;
  }

  get connected(): boolean {
    return this.socket !== null;
  }

  close(): void {
    const socket = this.socket;
    this.socket = null;
    socket?.close();
  }
}

// Thin WebSocket wrapper: hello on open, text fan-in, reconnect with a
// fixed backoff. The socket constructor is injectable so tests can drive
// the client without a browser.

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface GatewayClientOptions {
  url: string;
  helloPayload: string;
  onMessage: (text: string) => void;
  onOpen?: () => void;
  onLost?: () => void;
  reconnectMs?: number;
  socketFactory?: SocketFactory;
}

export class GatewayClient {
  private socket: SocketLike | null = null;
  private closed = false;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(private readonly opts: GatewayClientOptions) {}

  connect(): void {
    const factory =
      this.opts.socketFactory ?? ((url: string) => new WebSocket(url) as unknown as SocketLike);
    const socket = factory(this.opts.url);
    this.socket = socket;
    socket.onopen = () => {
      socket.send(this.opts.helloPayload);
      this.opts.onOpen?.();
    };
    socket.onmessage = (ev) => {
      if (typeof ev.data === "string") this.opts.onMessage(ev.data);
    };
    socket.onclose = () => this.handleLost();
    socket.onerror = () => {
      /* close always follows */
    };
  }

  send(text: string): boolean {
    if (!this.socket) return false;
    try {
      this.socket.send(text);
      return true;
    } catch {
      return false;
    }
  }

  private handleLost(): void {
    this.socket = null;
    if (this.closed) return;
    this.opts.onLost?.();
    const delay = this.opts.reconnectMs ?? 2000;
    this.reconnectTimer = setTimeout(() => this.connect(), delay);
  }

  close(): void {
    this.closed = true;
    if (this.reconnectTimer !== null) clearTimeout(this.reconnectTimer);
    this.socket?.close();
    this.socket = null;
  }
}

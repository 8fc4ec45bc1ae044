// Node-side transport: the gateway's single bidirectional line-JSON channel
// over TCP. Browsers use the HTTP mirror instead (see app.ts).

import * as net from "node:net";

import type { Command, EventMsg } from "./protocol.js";
import type { Transport } from "./client.js";

export function connectTcp(host: string, port: number): Promise<Transport> {
  return new Promise((resolve, reject) => {
    const socket = net.createConnection({ host, port });
    let buffer = "";
    const messageHandlers: ((event: EventMsg) => void)[] = [];
    const closeHandlers: (() => void)[] = [];

    socket.once("error", reject);
    socket.once("connect", () => {
      socket.removeListener("error", reject);
      socket.on("data", (chunk) => {
        buffer += chunk.toString("utf-8");
        let index = buffer.indexOf("\n");
        while (index >= 0) {
          const line = buffer.slice(0, index).trim();
          buffer = buffer.slice(index + 1);
          if (line) {
            const event = JSON.parse(line) as EventMsg;
            for (const handler of messageHandlers) {
              handler(event);
            }
          }
          index = buffer.indexOf("\n");
        }
      });
      socket.on("close", () => {
        for (const handler of closeHandlers) {
          handler();
        }
      });
      socket.on("error", () => undefined); // close handler reports it
      resolve({
        send(command: Command) {
          socket.write(JSON.stringify(command) + "\n");
        },
        onMessage(handler) {
          messageHandlers.push(handler);
        },
        onClose(handler) {
          closeHandlers.push(handler);
        },
        close() {
          socket.end();
          socket.destroy();
        },
      });
    });
  });
}

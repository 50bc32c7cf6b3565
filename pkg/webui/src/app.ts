/**
 * Browser entry point: binds the DOM controls to the socket client.
 *
 * The canvas is display-only; clicks become strokes, drags orbit the
 * camera, and everything else is sliders and buttons over UiState. All
 * geometry happens server-side.
 */

import { SculptClient, SocketLike } from "./client.js";
import {
  INTENSITY_DETENTS,
  INTENSITY_RANGE,
  RADIUS_DETENTS,
  RADIUS_RANGE,
  TemplateName,
} from "./state.js";

const DRAG_THRESHOLD_PX = 3;
const ORBIT_DEG_PER_PX = 0.4;

function must<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function fillDetents(listId: string, values: readonly number[]): void {
  const list = must<HTMLDataListElement>(listId);
  for (const value of values) {
    const option = document.createElement("option");
    option.value = String(value);
    list.appendChild(option);
  }
}

function main(): void {
  const canvas = must<HTMLCanvasElement>("view");
  const context = canvas.getContext("2d");
  if (context === null) {
    throw new Error("2d canvas context unavailable");
  }
  const logBox = must<HTMLPreElement>("log");
  const badge = must<HTMLSpanElement>("connection");
  const address = must<HTMLInputElement>("address");
  const radius = must<HTMLInputElement>("radius");
  const intensity = must<HTMLInputElement>("intensity");
  const template = must<HTMLSelectElement>("template");
  const dent = must<HTMLInputElement>("dent");

  fillDetents("radius-detents", RADIUS_DETENTS);
  fillDetents("intensity-detents", INTENSITY_DETENTS);
  radius.min = String(RADIUS_RANGE[0]);
  radius.max = String(RADIUS_RANGE[1]);
  intensity.min = String(INTENSITY_RANGE[0]);
  intensity.max = String(INTENSITY_RANGE[1]);

  const client = new SculptClient(
    (url) => new WebSocket(url) as unknown as SocketLike,
    {
      onFrame: (_id, png) => {
        void createImageBitmap(new Blob([png.slice()], { type: "image/png" })).then((bitmap) => {
          context.drawImage(bitmap, 0, 0, canvas.width, canvas.height);
        });
      },
      onConnection: (status) => {
        badge.textContent = status;
        badge.className = status;
      },
      onStatus: refreshLog,
      onServerError: refreshLog,
      onHint: refreshLog,
    },
  );

  function refreshLog(): void {
    logBox.textContent = client.state.log.slice(-12).join("\n");
    logBox.scrollTop = logBox.scrollHeight;
  }

  function pushBrush(): void {
    client.setBrush({
      template: template.value as TemplateName,
      radius: Number(radius.value),
      intensity: Number(intensity.value),
      dent: dent.checked,
    });
  }

  must<HTMLButtonElement>("connect").addEventListener("click", () => {
    client.connect(address.value);
  });
  must<HTMLButtonElement>("undo").addEventListener("click", () => {
    client.undo();
  });
  for (const control of [radius, intensity, template, dent]) {
    control.addEventListener("change", pushBrush);
  }

  let dragging = false;
  let moved = false;
  let lastX = 0;
  let lastY = 0;
  canvas.addEventListener("pointerdown", (event) => {
    dragging = true;
    moved = false;
    lastX = event.clientX;
    lastY = event.clientY;
    canvas.setPointerCapture(event.pointerId);
  });
  canvas.addEventListener("pointermove", (event) => {
    if (!dragging) {
      return;
    }
    const dx = event.clientX - lastX;
    const dy = event.clientY - lastY;
    if (Math.abs(dx) + Math.abs(dy) > DRAG_THRESHOLD_PX) {
      moved = true;
    }
    if (moved) {
      lastX = event.clientX;
      lastY = event.clientY;
      const orbit = client.state.orbit;
      client.setOrbit({
        azimuthDeg: orbit.azimuthDeg - dx * ORBIT_DEG_PER_PX,
        elevationDeg: Math.min(89, Math.max(-89, orbit.elevationDeg + dy * ORBIT_DEG_PER_PX)),
        distance: orbit.distance,
      });
    }
  });
  canvas.addEventListener("pointerup", (event) => {
    if (dragging && !moved) {
      const rect = canvas.getBoundingClientRect();
      client.stroke(rect, event.clientX - rect.left, event.clientY - rect.top);
    }
    dragging = false;
  });
  canvas.addEventListener("wheel", (event) => {
    event.preventDefault();
    const orbit = client.state.orbit;
    const factor = event.deltaY > 0 ? 1.1 : 0.9;
    client.setOrbit({
      ...orbit,
      distance: Math.min(5, Math.max(0.5, orbit.distance * factor)),
    });
  });

  pushBrush();
}

main();

// Client-side application of the server's posture-to-cursor map.
//
// The map itself always comes from a server message (hello or
// calibration-done); this module only applies it, with the same exactly
// rounded projection sums the server uses, so the rendered cursor is bit for
// bit the position the server scores against.

import { fsum } from "./fsum.js";
import type { MapParams } from "./protocol.js";

export const N_JOINTS = 20;

export function cursorPosition(map: MapParams, pose: ArrayLike<number>): [number, number] {
  if (pose.length !== map.center.length) {
    throw new Error(`pose has ${pose.length} joints, map expects ${map.center.length}`);
  }
  const coords: [number, number] = [0, 0];
  for (let r = 0; r < 2; r++) {
    const row = map.weights[r];
    const prods = new Float64Array(map.center.length);
    for (let j = 0; j < map.center.length; j++) {
      prods[j] = row[j] * (pose[j] - map.center[j]);
    }
    coords[r] = fsum(prods) + map.window_center[r];
  }
  return coords;
}

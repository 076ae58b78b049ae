// Virtual 20-DoF hand: 5 fingers x 4 joints, driven by on-screen sliders and
// key bindings. Stands in for a glove; anything that can feed setJoint()
// (a real device stream included) can drive the game the same way.

export const N_FINGERS = 5;
export const JOINTS_PER_FINGER = 4;
export const N_JOINTS = N_FINGERS * JOINTS_PER_FINGER;

export interface JointRange {
  min: number;
  max: number;
}

// joint angles in radians, with a little slack past a right angle
export const DEFAULT_RANGE: JointRange = { min: 0.0, max: 1.6 };
export const DEFAULT_REST = 0.8;
export const KEY_STEP = 0.05;

// keys 1..5 select a finger; each joint of the selected finger has an
// increase/decrease key pair, proximal to distal
export const JOINT_KEYS: ReadonlyArray<readonly [string, string]> = [
  ["q", "a"],
  ["w", "s"],
  ["e", "d"],
  ["r", "f"],
];

export class VirtualHand {
  private readonly joints: Float64Array;
  private finger = 0;

  constructor(
    private readonly range: JointRange = DEFAULT_RANGE,
    rest: number = DEFAULT_REST,
  ) {
    if (!(range.min < range.max)) {
      throw new Error(`joint range must have min < max, got [${range.min}, ${range.max}]`);
    }
    this.joints = new Float64Array(N_JOINTS).fill(this.clamp(rest));
  }

  private clamp(v: number): number {
    return Math.min(this.range.max, Math.max(this.range.min, v));
  }

  jointIndex(finger: number, joint: number): number {
    if (finger < 0 || finger >= N_FINGERS || joint < 0 || joint >= JOINTS_PER_FINGER) {
      throw new Error(`no joint ${joint} on finger ${finger}`);
    }
    return finger * JOINTS_PER_FINGER + joint;
  }

  setJoint(index: number, value: number): void {
    if (index < 0 || index >= N_JOINTS) throw new Error(`joint index ${index} out of range`);
    this.joints[index] = this.clamp(value);
  }

  adjust(index: number, delta: number): void {
    this.setJoint(index, this.joints[index] + delta);
  }

  selectFinger(finger: number): void {
    if (finger < 0 || finger >= N_FINGERS) throw new Error(`no finger ${finger}`);
    this.finger = finger;
  }

  get selectedFinger(): number {
    return this.finger;
  }

  // Returns true when the key drives the hand (so callers can swallow it).
  handleKey(key: string): boolean {
    const digit = "12345".indexOf(key);
    if (digit >= 0) {
      this.selectFinger(digit);
      return true;
    }
    for (let joint = 0; joint < JOINT_KEYS.length; joint++) {
      const [up, down] = JOINT_KEYS[joint];
      if (key === up || key === down) {
        this.adjust(this.jointIndex(this.finger, joint), key === up ? KEY_STEP : -KEY_STEP);
        return true;
      }
    }
    return false;
  }

  joint(index: number): number {
    if (index < 0 || index >= N_JOINTS) throw new Error(`joint index ${index} out of range`);
    return this.joints[index];
  }

  snapshot(): number[] {
    return Array.from(this.joints);
  }
}

// Minimal 2D ball physics for the weight-scale panel. Balls fall into a pan,
// collide, and settle. Radii and masses are set once from the payload and are
// never touched by the integrator; only positions and velocities move.

export interface Ball {
  id: string;
  x: number;
  y: number;
  vx: number;
  vy: number;
  r: number;
  mass: number;
  color: string;
}

export interface Pan {
  cx: number;
  floorY: number;
  halfWidth: number;
}

const GRAVITY = 900;    // px/s^2
const DAMPING = 0.995;
const RESTITUTION = 0.18;
const SETTLE_SPEED = 4; // px/s below which a ball counts as resting

export function makeBall(id: string, x: number, y: number, r: number,
                         mass: number, color: string): Ball {
  return { id, x, y, vx: 0, vy: 0, r, mass, color };
}

function collidePair(a: Ball, b: Ball): void {
  const dx = b.x - a.x;
  const dy = b.y - a.y;
  const dist = Math.hypot(dx, dy);
  const minDist = a.r + b.r;
  if (dist >= minDist || dist === 0) return;
  const nx = dx / dist;
  const ny = dy / dist;
  const overlap = minDist - dist;
  const total = a.mass + b.mass;
  // positional separation weighted by mass so heavy balls barely budge
  a.x -= nx * overlap * (b.mass / total);
  a.y -= ny * overlap * (b.mass / total);
  b.x += nx * overlap * (a.mass / total);
  b.y += ny * overlap * (a.mass / total);
  const rvx = b.vx - a.vx;
  const rvy = b.vy - a.vy;
  const along = rvx * nx + rvy * ny;
  if (along > 0) return;
  const j = -(1 + RESTITUTION) * along / (1 / a.mass + 1 / b.mass);
  a.vx -= (j * nx) / a.mass;
  a.vy -= (j * ny) / a.mass;
  b.vx += (j * nx) / b.mass;
  b.vy += (j * ny) / b.mass;
}

function containInPan(ball: Ball, pan: Pan): void {
  const left = pan.cx - pan.halfWidth + ball.r;
  const right = pan.cx + pan.halfWidth - ball.r;
  if (ball.x < left) {
    ball.x = left;
    if (ball.vx < 0) ball.vx = -ball.vx * RESTITUTION;
  } else if (ball.x > right) {
    ball.x = right;
    if (ball.vx > 0) ball.vx = -ball.vx * RESTITUTION;
  }
  const floor = pan.floorY - ball.r;
  if (ball.y > floor) {
    ball.y = floor;
    if (ball.vy > 0) ball.vy = -ball.vy * RESTITUTION;
    ball.vx *= 0.92; // floor friction
  }
}

/** Advance one timestep. dt is seconds, typically 1/60. */
export function step(balls: Ball[], pan: Pan, dt: number): void {
  for (const b of balls) {
    b.vy += GRAVITY * dt;
    b.vx *= DAMPING;
    b.vy *= DAMPING;
    b.x += b.vx * dt;
    b.y += b.vy * dt;
  }
  // two relaxation passes keep stacks from jittering
  for (let pass = 0; pass < 2; pass++) {
    for (let i = 0; i < balls.length; i++) {
      for (let j = i + 1; j < balls.length; j++) {
        collidePair(balls[i], balls[j]);
      }
    }
    for (const b of balls) containInPan(b, pan);
  }
}

export function settled(balls: Ball[]): boolean {
  return balls.every((b) => Math.hypot(b.vx, b.vy) < SETTLE_SPEED);
}

/** Drop balls in a loose pile above the pan so they tumble in. */
export function seedPositions(balls: Ball[], pan: Pan): void {
  let cursor = pan.cx - pan.halfWidth * 0.6;
  balls.forEach((b, i) => {
    b.x = Math.min(pan.cx + pan.halfWidth - b.r,
                   Math.max(pan.cx - pan.halfWidth + b.r, cursor));
    b.y = pan.floorY - b.r - 40 - (i % 3) * 30;
    b.vx = 0;
    b.vy = 0;
    cursor += b.r * 2 + 6;
    if (cursor > pan.cx + pan.halfWidth * 0.6) {
      cursor = pan.cx - pan.halfWidth * 0.55 + (i % 5) * 7;
    }
  });
}

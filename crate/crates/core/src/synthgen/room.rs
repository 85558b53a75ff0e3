use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::pixel_direction;
use crate::image::{EquirectPanorama, Image};

enum Surface {
    Floor,
    Ceiling,
    Wall(usize),
}

struct Room {
    half_x: f64,
    half_z: f64,
    ceiling: f64,
    camera_height: f64,
    floor: [f64; 3],
    ceiling_color: [f64; 3],
    walls: [[f64; 3]; 4],
    phases: [f64; 4],
}

impl Room {
    fn random(camera_height: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tint = |base: f64, spread: f64| {
            let b = base + rng.random_range(-spread..spread);
            [
                b + rng.random_range(-0.04..0.04),
                b + rng.random_range(-0.04..0.04),
                b + rng.random_range(-0.04..0.04),
            ]
        };
        let floor = tint(0.5, 0.1);
        let ceiling_color = tint(0.88, 0.04);
        let wall = tint(0.74, 0.08);
        let mut walls = [wall; 4];
        for (i, w) in walls.iter_mut().enumerate() {
            let k = 1.0 - 0.03 * i as f64;
            *w = [w[0] * k, w[1] * k, w[2] * k];
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        Self {
            half_x: rng.random_range(3.6..5.5),
            half_z: rng.random_range(3.6..5.5),
            ceiling: camera_height + rng.random_range(1.0..1.7),
            camera_height,
            floor,
            ceiling_color,
            walls,
            phases: [
                rng.random_range(0.0..6.3),
                rng.random_range(0.0..6.3),
                rng.random_range(0.0..6.3),
                rng.random_range(0.0..6.3),
            ],
        }
    }

    fn trace(&self, d: [f64; 3]) -> (Surface, [f64; 3]) {
        let mut best = (f64::INFINITY, Surface::Floor);
        if d[1] < 0.0 {
            best = (self.camera_height / -d[1], Surface::Floor);
        } else if d[1] > 0.0 {
            best = ((self.ceiling - self.camera_height) / d[1], Surface::Ceiling);
        }
        let walls = [
            (0, self.half_x, d[0]),
            (1, self.half_x, -d[0]),
            (2, self.half_z, d[2]),
            (3, self.half_z, -d[2]),
        ];
        for (i, half, comp) in walls {
            if comp > 0.0 {
                let t = half / comp;
                if t < best.0 {
                    best = (t, Surface::Wall(i));
                }
            }
        }
        let t = best.0;
        let p = [t * d[0], self.camera_height + t * d[1], t * d[2]];
        (best.1, p)
    }

    /// Linear RGB in `[0, 1]`: flat colors with smooth, low-contrast
    /// variation and a soft falloff towards the walls.
    fn shade(&self, d: [f64; 3]) -> [f64; 3] {
        let (surface, p) = self.trace(d);
        let ph = &self.phases;
        let (base, wave) = match surface {
            Surface::Floor => (
                self.floor,
                0.05 * (0.9 * p[0] + ph[0]).sin() + 0.04 * (0.6 * p[2] + ph[1]).sin(),
            ),
            Surface::Ceiling => (self.ceiling_color, 0.02 * (0.5 * (p[0] + p[2]) + ph[2]).sin()),
            Surface::Wall(i) => {
                let u = if i < 2 { p[2] } else { p[0] };
                let v = p[1] / self.ceiling;
                (
                    self.walls[i],
                    0.03 * (0.7 * u + ph[3]).sin() + 0.06 * (v - 0.5),
                )
            }
        };
        let r2 = p[0] * p[0] + p[2] * p[2];
        let falloff = 0.88 + 0.12 * (-r2 / 40.0).exp();
        let k = (1.0 + wave) * falloff;
        [base[0] * k, base[1] * k, base[2] * k]
    }
}

/// An unfurnished box room seen from `camera_height`, 2x2 supersampled.
pub fn procedural_room(width: usize, camera_height: f64, seed: u64) -> EquirectPanorama {
    let height = width / 2;
    let room = Room::random(camera_height, seed);
    let mut img = Image::filled(width, height, 3, 0u8);
    for y in 0..height {
        let row = img.row_mut(y);
        for x in 0..width {
            let mut acc = [0.0f64; 3];
            for (sx, sy) in [(0.25, 0.25), (0.75, 0.25), (0.25, 0.75), (0.75, 0.75)] {
                let c = room.shade(pixel_direction(x as f64 + sx, y as f64 + sy, width, height));
                for k in 0..3 {
                    acc[k] += c[k];
                }
            }
            for k in 0..3 {
                row[3 * x + k] = (acc[k] / 4.0 * 255.0).round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    img
}

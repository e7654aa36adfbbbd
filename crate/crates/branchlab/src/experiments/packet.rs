//! Free Gaussian wave packets evolved analytically (continuum, ħ = 1).
//!
//! Means move ballistically, `z̄(t) = k t/m + z_in`, and the coordinate
//! dispersion grows as `σ²(t) = t²/(4 d² m²) + d²`, minimal at `t = 0`.

use num_complex::Complex64 as C64;

/// One-axis free Gaussian packet.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct GaussianPacket {
    /// Momentum.
    pub k: f64,
    /// Initial mean position.
    pub z_in: f64,
    /// Initial dispersion (length).
    pub d: f64,
    /// Mass.
    pub m: f64,
}

impl GaussianPacket {
    pub fn new(k: f64, z_in: f64, d: f64, m: f64) -> GaussianPacket {
        assert!(d > 0.0 && m > 0.0, "dispersion and mass must be positive");
        GaussianPacket { k, z_in, d, m }
    }

    /// Mean position at time `t`.
    pub fn mean(&self, t: f64) -> f64 {
        self.k * t / self.m + self.z_in
    }

    /// Coordinate variance at time `t`.
    pub fn variance(&self, t: f64) -> f64 {
        t * t / (4.0 * self.d * self.d * self.m * self.m) + self.d * self.d
    }

    /// Coordinate dispersion at time `t`.
    pub fn dispersion(&self, t: f64) -> f64 {
        self.variance(t).sqrt()
    }

    /// Complex width `s(t) = d·(1 + i t/(2 m d²))`; `|s|² = variance`.
    fn width(&self, t: f64) -> C64 {
        C64::new(self.d, t / (2.0 * self.m * self.d))
    }

    /// The evolved wave function.
    pub fn wavefunction(&self, x: f64, t: f64) -> C64 {
        let s = self.width(t);
        let prefactor = (2.0 * std::f64::consts::PI * self.d * self.d).powf(-0.25)
            * (C64::new(self.d, 0.0) / s).sqrt();
        let xi = x - self.mean(t);
        let phase = C64::new(0.0, self.k * (x - self.z_in) - self.k * self.k * t / (2.0 * self.m));
        let envelope = C64::new(-xi * xi, 0.0) / (C64::new(4.0 * self.d, 0.0) * s);
        prefactor * (phase + envelope).exp()
    }

    /// `|ψ(x,t)|²`.
    pub fn density(&self, x: f64, t: f64) -> f64 {
        self.wavefunction(x, t).norm_sqr()
    }
}

/// A separable two-axis packet.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct GaussianPacket2D {
    pub x: GaussianPacket,
    pub y: GaussianPacket,
}

impl GaussianPacket2D {
    pub fn new(k: (f64, f64), z_in: (f64, f64), d: f64, m: f64) -> GaussianPacket2D {
        GaussianPacket2D {
            x: GaussianPacket::new(k.0, z_in.0, d, m),
            y: GaussianPacket::new(k.1, z_in.1, d, m),
        }
    }

    pub fn mean(&self, t: f64) -> (f64, f64) {
        (self.x.mean(t), self.y.mean(t))
    }
}

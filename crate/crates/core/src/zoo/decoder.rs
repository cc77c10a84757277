//! Functional decoders: landmark minimum, inverse dot product, ℓ1 norm,
//! and the metric scaling used by the Manhattan baseline.

use serde::{Deserialize, Serialize};

use crate::graph::{Coordinate, EARTH_RADIUS_M};

/// Meters per degree of latitude and longitude at a reference latitude.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManhattanScale {
    pub m_per_deg_lat: f64,
    pub m_per_deg_lon: f64,
}

impl ManhattanScale {
    pub fn at_latitude(lat_deg: f64) -> Self {
        let k = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
        ManhattanScale { m_per_deg_lat: k, m_per_deg_lon: k * lat_deg.to_radians().cos() }
    }

    #[inline]
    pub fn from_deltas(&self, dlat: f64, dlon: f64) -> f64 {
        dlat.abs() * self.m_per_deg_lat + dlon.abs() * self.m_per_deg_lon
    }

    #[inline]
    pub fn distance(&self, a: Coordinate, b: Coordinate) -> f64 {
        self.from_deltas(a.lat - b.lat, a.lon - b.lon)
    }
}

/// `min_i (hu[i] + hv[i])`
#[inline]
pub fn decode_landmark_min(hu: &[f64], hv: &[f64]) -> f64 {
    crate::opcount::add(2 * hu.len() as u64);
    hu.iter().zip(hv).map(|(a, b)| a + b).fold(f64::INFINITY, f64::min)
}

/// `max(0, (1 − hu·hv) · d_max / 2)`
#[inline]
pub fn decode_inverse_dot(hu: &[f64], hv: &[f64], d_max: f64) -> f64 {
    crate::opcount::add(2 * hu.len() as u64 + 3);
    ((1.0 - crate::nn::matrix::dot(hu, hv)) * d_max / 2.0).max(0.0)
}

/// `Σ |hu[i] − hv[i]|`
#[inline]
pub fn decode_l1(hu: &[f64], hv: &[f64]) -> f64 {
    crate::opcount::add(2 * hu.len() as u64);
    hu.iter().zip(hv).map(|(a, b)| (a - b).abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn landmark_min() {
        assert_eq!(decode_landmark_min(&[3.0, 5.0], &[4.0, 1.0]), 6.0);
    }

    #[test]
    fn inverse_dot() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(decode_inverse_dot(&[1.0, 0.0], &[1.0, 0.0], 100.0), 0.0);
        assert_eq!(decode_inverse_dot(&[1.0, 0.0], &[-1.0, 0.0], 100.0), 100.0);
        assert_eq!(decode_inverse_dot(&[1.0, 0.0], &[0.0, 1.0], 100.0), 50.0);
        assert!(decode_inverse_dot(&[s, s], &[s, s], 10.0) >= 0.0);
        assert_eq!(decode_inverse_dot(&[2.0], &[2.0], 10.0), 0.0);
    }

    #[test]
    fn l1() {
        assert_eq!(decode_l1(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(decode_l1(&[1.0, 2.0], &[3.0, 0.0]), 4.0);
        assert_eq!(decode_l1(&[0.1, -7.0], &[3.3, 0.4]), decode_l1(&[3.3, 0.4], &[0.1, -7.0]));
    }

    #[test]
    fn manhattan_scale_equator() {
        let s = ManhattanScale::at_latitude(0.0);
        let a = Coordinate { lat: 0.0, lon: 0.0 };
        let b = Coordinate { lat: 1.0, lon: 1.0 };
        let k = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
        assert!((s.distance(a, b) - 2.0 * k).abs() < 1e-6);
        assert_eq!(s.distance(a, a), 0.0);
    }
}

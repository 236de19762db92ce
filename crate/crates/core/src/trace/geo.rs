//! Local planar projection of geodetic coordinates.
//!
//! Azimuthal equidistant projection on a sphere: distances and bearings
//! from the origin are exact, so grid cells near the origin are true to
//! scale.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Mean earth radius (IUGG), meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        let p = Self { lat, lon };
        p.check()?;
        Ok(p)
    }

    pub(crate) fn check(&self) -> Result<()> {
        let ok = self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon);
        if ok {
            Ok(())
        } else {
            Err(Error::CoordinateOutOfRange { lat: self.lat, lon: self.lon })
        }
    }
}

/// Planar position in meters; `x` points east, `y` north.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

pub fn project_position(point: GeoPoint, origin: GeoPoint) -> Result<Position> {
    point.check()?;
    origin.check()?;
    let (phi0, lam0) = (origin.lat.to_radians(), origin.lon.to_radians());
    let (phi, lam) = (point.lat.to_radians(), point.lon.to_radians());
    let dlam = lam - lam0;
    let dphi = phi - phi0;

    let s1 = libm::sin(dphi / 2.0);
    let s2 = libm::sin(dlam / 2.0);
    let a = s1 * s1 + libm::cos(phi0) * libm::cos(phi) * s2 * s2;
    let c = 2.0 * libm::atan2(libm::sqrt(a), libm::sqrt((1.0 - a).max(0.0)));
    if c == 0.0 {
        return Ok(Position::default());
    }
    let az = libm::atan2(
        libm::sin(dlam) * libm::cos(phi),
        libm::cos(phi0) * libm::sin(phi) - libm::sin(phi0) * libm::cos(phi) * libm::cos(dlam),
    );
    let rho = EARTH_RADIUS_M * c;
    Ok(Position { x: rho * libm::sin(az), y: rho * libm::cos(az) })
}

/// Inverse of [`project_position`].
pub fn unproject_position(pos: Position, origin: GeoPoint) -> Result<GeoPoint> {
    origin.check()?;
    let rho = libm::hypot(pos.x, pos.y);
    if rho == 0.0 {
        return Ok(origin);
    }
    let c = rho / EARTH_RADIUS_M;
    let az = libm::atan2(pos.x, pos.y);
    let phi0 = origin.lat.to_radians();
    let phi = libm::asin(
        libm::sin(phi0) * libm::cos(c) + libm::cos(phi0) * libm::sin(c) * libm::cos(az),
    );
    let lam = origin.lon.to_radians()
        + libm::atan2(
            libm::sin(az) * libm::sin(c) * libm::cos(phi0),
            libm::cos(c) - libm::sin(phi0) * libm::sin(phi),
        );
    let mut lon = lam.to_degrees();
    if lon > 180.0 {
        lon -= 360.0;
    } else if lon < -180.0 {
        lon += 360.0;
    }
    GeoPoint::new(phi.to_degrees(), lon)
}

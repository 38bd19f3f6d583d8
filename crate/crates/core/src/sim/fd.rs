use crate::error::{Error, Result};

/// Triangular fundamental diagram, per lane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalDiagram {
    /// mph
    pub free_flow_speed: f64,
    /// Backward wave speed magnitude, mph.
    pub wave_speed: f64,
    /// veh/mi/lane
    pub jam_density: f64,
}

impl Default for FundamentalDiagram {
    fn default() -> Self {
        Self {
            free_flow_speed: 70.0,
            wave_speed: 14.0,
            jam_density: 180.0,
        }
    }
}

impl FundamentalDiagram {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("free_flow_speed", self.free_flow_speed),
            ("wave_speed", self.wave_speed),
            ("jam_density", self.jam_density),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(format!("simulation.{name}"), format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Apex of the triangle, veh/mi/lane.
    pub fn critical_density(&self) -> f64 {
        self.wave_speed * self.jam_density / (self.free_flow_speed + self.wave_speed)
    }

    /// veh/hr/lane
    pub fn capacity(&self) -> f64 {
        self.free_flow_speed * self.critical_density()
    }

    /// Equilibrium flow at density `k` (veh/mi/lane).
    pub fn flow(&self, k: f64) -> f64 {
        (self.free_flow_speed * k).min(self.wave_speed * (self.jam_density - k)).max(0.0)
    }

    /// Congested-branch density carrying flow `q` (veh/hr/lane).
    pub fn congested_density(&self, q: f64) -> f64 {
        self.jam_density - q / self.wave_speed
    }

    /// Rankine-Hugoniot speed of the front between two states (mph, positive downstream).
    pub fn shock_speed(q_up: f64, k_up: f64, q_down: f64, k_down: f64) -> f64 {
        (q_down - q_up) / (k_down - k_up)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apex_is_consistent() {
        let fd = FundamentalDiagram::default();
        let kc = fd.critical_density();
        assert!((fd.free_flow_speed * kc - fd.wave_speed * (fd.jam_density - kc)).abs() < 1e-9);
        assert!((fd.capacity() - 2100.0).abs() < 1e-9);
        assert_eq!(fd.flow(fd.jam_density), 0.0);
        assert!((fd.flow(kc) - fd.capacity()).abs() < 1e-9);
        assert!((fd.congested_density(fd.capacity()) - kc).abs() < 1e-9);
    }
}

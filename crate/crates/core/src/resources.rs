use std::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Serialize};

/// CPU in MIPS and memory in GB.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Resources {
    pub cpu: f64,
    pub mem: f64,
}

impl Resources {
    pub const ZERO: Resources = Resources { cpu: 0.0, mem: 0.0 };

    pub const fn new(cpu: f64, mem: f64) -> Self {
        Resources { cpu, mem }
    }

    /// Componentwise `self <= other`.
    pub fn fits_in(&self, other: &Resources) -> bool {
        self.cpu <= other.cpu && self.mem <= other.mem
    }

    /// Componentwise `self < other`.
    pub fn strictly_below(&self, other: &Resources) -> bool {
        self.cpu < other.cpu && self.mem < other.mem
    }

    pub fn max(&self, other: &Resources) -> Resources {
        Resources::new(self.cpu.max(other.cpu), self.mem.max(other.mem))
    }

    pub fn min(&self, other: &Resources) -> Resources {
        Resources::new(self.cpu.min(other.cpu), self.mem.min(other.mem))
    }

    pub fn is_valid(&self) -> bool {
        self.cpu.is_finite() && self.mem.is_finite() && self.cpu >= 0.0 && self.mem >= 0.0
    }

    pub fn is_zero(&self) -> bool {
        self.cpu == 0.0 && self.mem == 0.0
    }

    pub fn to_vec(self) -> Vec<f64> {
        vec![self.cpu, self.mem]
    }
}

impl Add for Resources {
    type Output = Resources;
    fn add(self, o: Resources) -> Resources {
        Resources::new(self.cpu + o.cpu, self.mem + o.mem)
    }
}

impl AddAssign for Resources {
    fn add_assign(&mut self, o: Resources) {
        self.cpu += o.cpu;
        self.mem += o.mem;
    }
}

impl Sub for Resources {
    type Output = Resources;
    fn sub(self, o: Resources) -> Resources {
        Resources::new(self.cpu - o.cpu, self.mem - o.mem)
    }
}

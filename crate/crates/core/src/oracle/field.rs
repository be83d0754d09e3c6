//! Dense affordance containers.

use crate::error::{Error, Result};
use crate::grid::{Cell, GridMap};
use crate::learning::vonmises::{VmComponent, VonMisesMixture};

/// Directional components stored per cell.
pub const MAX_COMPONENTS: usize = 3;

/// Per-cell von Mises mixtures with up to [`MAX_COMPONENTS`] components;
/// inactive components carry weight 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalField {
    height: usize,
    width: usize,
    cells: Vec<[VmComponent; MAX_COMPONENTS]>,
}

impl DirectionalField {
    pub fn new(height: usize, width: usize) -> Self {
        DirectionalField { height, width, cells: vec![[VmComponent::default(); MAX_COMPONENTS]; height * width] }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, c: Cell) -> &[VmComponent; MAX_COMPONENTS] {
        &self.cells[c.i * self.width + c.j]
    }

    pub fn get_mut(&mut self, c: Cell) -> &mut [VmComponent; MAX_COMPONENTS] {
        &mut self.cells[c.i * self.width + c.j]
    }

    /// Replaces a cell's components; extra components beyond the cap are dropped.
    pub fn set(&mut self, c: Cell, comps: &[VmComponent]) {
        let slot = self.get_mut(c);
        *slot = [VmComponent::default(); MAX_COMPONENTS];
        for (s, v) in slot.iter_mut().zip(comps) {
            *s = *v;
        }
    }

    pub fn active(&self, c: Cell) -> impl Iterator<Item = &VmComponent> {
        self.get(c).iter().filter(|v| v.is_active())
    }

    pub fn active_count(&self, c: Cell) -> usize {
        self.active(c).count()
    }

    pub fn mixture(&self, c: Cell) -> VonMisesMixture {
        VonMisesMixture::new(self.active(c).copied().collect())
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.height).flat_map(move |i| (0..self.width).map(move |j| Cell::new(i, j)))
    }

    /// `9 x H x W`: weights, then means, then concentrations.
    pub fn to_tensor(&self) -> GridMap {
        let mut out = GridMap::zeros(3 * MAX_COMPONENTS, self.height, self.width);
        for c in self.cells() {
            for (k, v) in self.get(c).iter().enumerate() {
                out.set(k, c.i, c.j, v.weight);
                out.set(MAX_COMPONENTS + k, c.i, c.j, v.mean);
                out.set(2 * MAX_COMPONENTS + k, c.i, c.j, v.kappa);
            }
        }
        out
    }

    pub fn from_tensor(t: &GridMap) -> Result<Self> {
        if t.channels() != 3 * MAX_COMPONENTS {
            return Err(Error::Shape(format!(
                "direction tensor needs {} channels, found {}",
                3 * MAX_COMPONENTS,
                t.channels()
            )));
        }
        let mut f = DirectionalField::new(t.height(), t.width());
        for c in f.cells().collect::<Vec<_>>() {
            let comps: Vec<VmComponent> = (0..MAX_COMPONENTS)
                .map(|k| VmComponent {
                    weight: t.at(k, c),
                    mean: t.at(MAX_COMPONENTS + k, c),
                    kappa: t.at(2 * MAX_COMPONENTS + k, c),
                })
                .collect();
            f.set(c, &comps);
        }
        Ok(f)
    }
}

/// Lane, entry and exit maps plus the directional field, all at label
/// resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct AffordanceBundle {
    pub lane: GridMap,
    pub entry: GridMap,
    pub exit: GridMap,
    pub direction: DirectionalField,
    pub warnings: Vec<String>,
}

impl AffordanceBundle {
    pub fn empty(height: usize, width: usize) -> Self {
        AffordanceBundle {
            lane: GridMap::zeros(1, height, width),
            entry: GridMap::zeros(1, height, width),
            exit: GridMap::zeros(1, height, width),
            direction: DirectionalField::new(height, width),
            warnings: Vec::new(),
        }
    }

    /// Lane, entry and exit stacked into `3 x H x W`.
    pub fn affordance_tensor(&self) -> GridMap {
        GridMap::stack(&[&self.lane, &self.entry, &self.exit]).expect("bundle maps share a shape")
    }

    pub fn from_tensors(affordance: &GridMap, direction: &GridMap) -> Result<Self> {
        if affordance.channels() != 3 {
            return Err(Error::Shape(format!("affordance tensor needs 3 channels, found {}", affordance.channels())));
        }
        let direction = DirectionalField::from_tensor(direction)?;
        if (direction.height, direction.width) != (affordance.height(), affordance.width()) {
            return Err(Error::Shape("affordance and direction tensors disagree in size".into()));
        }
        Ok(AffordanceBundle {
            lane: affordance.extract_channel(0),
            entry: affordance.extract_channel(1),
            exit: affordance.extract_channel(2),
            direction,
            warnings: Vec::new(),
        })
    }

    pub fn height(&self) -> usize {
        self.lane.height()
    }

    pub fn width(&self) -> usize {
        self.lane.width()
    }
}

//! Ground-truth scene state.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::catalog::{AffordanceMask, Catalog, ClassId, ClassKind};

/// Side length of one grid cell in meters.
pub const CELL_SIZE: f64 = 0.25;

pub type ObjectId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellKind {
    Floor,
    Wall,
    /// Cell occupied by a fixed receptacle or appliance.
    ReceptacleSurface,
}

/// Where an object currently is. Exactly one of these holds at any time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Placement {
    Cell { x: i32, z: i32 },
    Inside(ObjectId),
    Held,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ObjectState {
    pub is_open: bool,
    pub is_toggled: bool,
    pub is_sliced: bool,
    pub is_heated: bool,
    pub is_cooled: bool,
    pub is_cleaned: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub id: ObjectId,
    pub class_id: ClassId,
    pub placement: Placement,
    /// Static capability flags copied from the catalog.
    pub affordance_flags: AffordanceMask,
    pub state: ObjectState,
}

impl ObjectInstance {
    /// Affordances that are actionable right now.
    ///
    /// Openable objects show OPENABLE while closed and CLOSEABLE while open;
    /// toggles likewise; a sliced object is no longer sliceable.
    pub fn current_affordance(&self) -> AffordanceMask {
        use AffordanceMask as A;
        let f = self.affordance_flags;
        let mut m = f.0 & (A::PICKUPABLE.0 | A::RECEPTACLE.0);
        if f.contains(A::OPENABLE) && !self.state.is_open {
            m |= A::OPENABLE.0;
        }
        if f.contains(A::CLOSEABLE) && self.state.is_open {
            m |= A::CLOSEABLE.0;
        }
        if f.contains(A::TOGGLEABLE_ON) && !self.state.is_toggled {
            m |= A::TOGGLEABLE_ON.0;
        }
        if f.contains(A::TOGGLEABLE_OFF) && self.state.is_toggled {
            m |= A::TOGGLEABLE_OFF.0;
        }
        if f.contains(A::SLICEABLE) && !self.state.is_sliced {
            m |= A::SLICEABLE.0;
        }
        AffordanceMask(m)
    }

    /// Contents of this object can be seen and reached.
    pub fn is_accessible(&self) -> bool {
        !self.affordance_flags.contains(AffordanceMask::OPENABLE) || self.state.is_open
    }
}

/// Heading in quarter turns clockwise from +z (0 = +z, 1 = +x, 2 = -z, 3 = -x).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Yaw(pub u8);

impl Yaw {
    pub const ALL: [Yaw; 4] = [Yaw(0), Yaw(1), Yaw(2), Yaw(3)];

    pub fn from_degrees(deg: i32) -> Yaw {
        Yaw((deg.rem_euclid(360) / 90) as u8)
    }

    pub fn degrees(self) -> i32 {
        self.0 as i32 * 90
    }

    pub fn right(self) -> Yaw {
        Yaw((self.0 + 1) % 4)
    }

    pub fn left(self) -> Yaw {
        Yaw((self.0 + 3) % 4)
    }

    pub fn back(self) -> Yaw {
        Yaw((self.0 + 2) % 4)
    }

    /// Unit cell step `(dx, dz)` in this heading.
    pub fn delta(self) -> (i32, i32) {
        match self.0 {
            0 => (0, 1),
            1 => (1, 0),
            2 => (0, -1),
            _ => (-1, 0),
        }
    }
}

pub const HORIZON_MIN: i32 = -30;
pub const HORIZON_MAX: i32 = 60;
pub const HORIZON_STEP: i32 = 15;
/// Camera pitch at episode start, degrees below the horizon.
pub const INITIAL_HORIZON: i32 = 45;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AgentState {
    pub x: i32,
    pub z: i32,
    pub yaw: Yaw,
    /// Camera pitch in degrees, positive looking down.
    pub horizon: i32,
    pub held: Option<ObjectId>,
}

impl AgentState {
    pub fn new(x: i32, z: i32, yaw: Yaw) -> Self {
        AgentState {
            x,
            z,
            yaw,
            horizon: INITIAL_HORIZON,
            held: None,
        }
    }

    pub fn cell(&self) -> (i32, i32) {
        (self.x, self.z)
    }
}

pub const SCENE_FORMAT_VERSION: u32 = 1;

/// Ground-truth world: a rectangular room of cells plus object instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScene {
    pub version: u32,
    pub width: i32,
    pub height: i32,
    pub cells: Vec<CellKind>,
    pub objects: Vec<ObjectInstance>,
    pub agent_start: AgentState,
    pub rng_seed: u64,
    pub catalog: Arc<Catalog>,
    #[serde(skip)]
    occupancy: Vec<Option<ObjectId>>,
}

impl GridScene {
    /// Empty room: walls on the border, floor inside, agent at the center.
    pub fn empty(width: i32, height: i32, catalog: Arc<Catalog>, rng_seed: u64) -> Self {
        let mut cells = vec![CellKind::Floor; (width * height) as usize];
        for z in 0..height {
            for x in 0..width {
                if x == 0 || z == 0 || x == width - 1 || z == height - 1 {
                    cells[(z * width + x) as usize] = CellKind::Wall;
                }
            }
        }
        let mut scene = GridScene {
            version: SCENE_FORMAT_VERSION,
            width,
            height,
            cells,
            objects: Vec::new(),
            agent_start: AgentState::new(width / 2, height / 2, Yaw(0)),
            rng_seed,
            catalog,
            occupancy: Vec::new(),
        };
        scene.reindex();
        scene
    }

    /// Rebuild the cell occupancy cache after deserialization or edits.
    pub fn reindex(&mut self) {
        self.occupancy = vec![None; self.cells.len()];
        for o in &self.objects {
            if let Placement::Cell { x, z } = o.placement {
                let i = (z * self.width + x) as usize;
                self.occupancy[i] = Some(o.id);
            }
        }
    }

    pub fn in_bounds(&self, x: i32, z: i32) -> bool {
        x >= 0 && z >= 0 && x < self.width && z < self.height
    }

    pub fn cell(&self, x: i32, z: i32) -> CellKind {
        self.cells[(z * self.width + x) as usize]
    }

    pub fn set_cell(&mut self, x: i32, z: i32, kind: CellKind) {
        let w = self.width;
        self.cells[(z * w + x) as usize] = kind;
    }

    pub fn occupant(&self, x: i32, z: i32) -> Option<ObjectId> {
        if !self.in_bounds(x, z) {
            return None;
        }
        self.occupancy[(z * self.width + x) as usize]
    }

    /// Floor cell with nothing standing on it.
    pub fn is_navigable(&self, x: i32, z: i32) -> bool {
        self.in_bounds(x, z) && self.cell(x, z) == CellKind::Floor && self.occupant(x, z).is_none()
    }

    /// Ground-truth navigability mask, row-major `z * width + x`.
    pub fn navigability(&self) -> Vec<bool> {
        let mut out = Vec::with_capacity(self.cells.len());
        for z in 0..self.height {
            for x in 0..self.width {
                out.push(self.is_navigable(x, z));
            }
        }
        out
    }

    pub fn object(&self, id: ObjectId) -> Option<&ObjectInstance> {
        self.objects.get(id as usize).filter(|o| o.id == id)
    }

    pub fn object_mut(&mut self, id: ObjectId) -> Option<&mut ObjectInstance> {
        self.objects.get_mut(id as usize).filter(|o| o.id == id)
    }

    pub fn class_of(&self, id: ObjectId) -> ClassId {
        self.objects[id as usize].class_id
    }

    pub fn class_name(&self, id: ObjectId) -> &str {
        self.catalog.name(self.class_of(id))
    }

    pub fn instances_of(&self, class: ClassId) -> impl Iterator<Item = &ObjectInstance> + '_ {
        self.objects.iter().filter(move |o| o.class_id == class)
    }

    /// Direct contents of a receptacle, in id order.
    pub fn contents(&self, id: ObjectId) -> impl Iterator<Item = &ObjectInstance> + '_ {
        self.objects
            .iter()
            .filter(move |o| o.placement == Placement::Inside(id))
    }

    /// All contents reachable through accessible containers, depth-first.
    pub fn visible_contents(&self, id: ObjectId, out: &mut Vec<ObjectId>) {
        let Some(container) = self.object(id) else {
            return;
        };
        if !container.is_accessible() {
            return;
        }
        for c in self.contents(id) {
            out.push(c.id);
            self.visible_contents(c.id, out);
        }
    }

    /// Cell the object ultimately rests in, following containment; `None`
    /// when it (or an ancestor) is held.
    pub fn root_cell(&self, id: ObjectId) -> Option<(i32, i32)> {
        let mut cur = id;
        for _ in 0..=self.objects.len() {
            match self.objects[cur as usize].placement {
                Placement::Cell { x, z } => return Some((x, z)),
                Placement::Inside(p) => cur = p,
                Placement::Held => return None,
            }
        }
        None
    }

    /// Outermost container of `id` (itself if it stands on a cell or is held).
    pub fn root_object(&self, id: ObjectId) -> ObjectId {
        let mut cur = id;
        for _ in 0..=self.objects.len() {
            match self.objects[cur as usize].placement {
                Placement::Inside(p) => cur = p,
                _ => return cur,
            }
        }
        cur
    }

    /// Whether `id` is `ancestor` or nested somewhere inside it.
    pub fn is_within(&self, id: ObjectId, ancestor: ObjectId) -> bool {
        let mut cur = id;
        for _ in 0..=self.objects.len() {
            if cur == ancestor {
                return true;
            }
            match self.objects[cur as usize].placement {
                Placement::Inside(p) => cur = p,
                _ => return false,
            }
        }
        false
    }

    /// Whether every path to the object passes through open containers.
    pub fn is_reachable_content(&self, id: ObjectId) -> bool {
        let mut cur = id;
        for _ in 0..=self.objects.len() {
            match self.objects[cur as usize].placement {
                Placement::Cell { .. } => return true,
                Placement::Held => return true,
                Placement::Inside(p) => {
                    if !self.objects[p as usize].is_accessible() {
                        return false;
                    }
                    cur = p;
                }
            }
        }
        false
    }

    pub fn held_count(&self) -> usize {
        self.objects
            .iter()
            .filter(|o| o.placement == Placement::Held)
            .count()
    }

    /// Add an object, returning its id. Caller keeps placement invariants.
    pub fn add_object(&mut self, class_id: ClassId, placement: Placement) -> ObjectId {
        let id = self.objects.len() as ObjectId;
        let catalog = self.catalog.clone();
        let info = catalog.get(class_id);
        if let Placement::Cell { x, z } = placement {
            if info.kind == ClassKind::Fixed {
                self.set_cell(x, z, CellKind::ReceptacleSurface);
            }
        }
        self.objects.push(ObjectInstance {
            id,
            class_id,
            placement,
            affordance_flags: info.affordances,
            state: ObjectState::default(),
        });
        self.reindex();
        id
    }

    pub(crate) fn set_placement(&mut self, id: ObjectId, placement: Placement) {
        self.objects[id as usize].placement = placement;
        self.reindex();
    }
}

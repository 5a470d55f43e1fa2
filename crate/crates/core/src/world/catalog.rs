//! Object class roster and affordance bits.

use serde::{Deserialize, Serialize};

/// Index of an object class in the catalog, `0..n_object_classes`.
pub type ClassId = usize;

/// Seven interaction affordances carried by objects as a bitmask.
///
/// Navigability is a property of cells, not objects, so it has no bit here.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AffordanceMask(pub u8);

impl AffordanceMask {
    pub const PICKUPABLE: AffordanceMask = AffordanceMask(1 << 0);
    pub const RECEPTACLE: AffordanceMask = AffordanceMask(1 << 1);
    pub const OPENABLE: AffordanceMask = AffordanceMask(1 << 2);
    pub const CLOSEABLE: AffordanceMask = AffordanceMask(1 << 3);
    pub const TOGGLEABLE_ON: AffordanceMask = AffordanceMask(1 << 4);
    pub const TOGGLEABLE_OFF: AffordanceMask = AffordanceMask(1 << 5);
    pub const SLICEABLE: AffordanceMask = AffordanceMask(1 << 6);

    pub const NONE: AffordanceMask = AffordanceMask(0);
    pub const COUNT: usize = 7;

    pub fn contains(self, other: AffordanceMask) -> bool {
        self.0 & other.0 == other.0 && other.0 != 0
    }

    pub fn union(self, other: AffordanceMask) -> AffordanceMask {
        AffordanceMask(self.0 | other.0)
    }

    pub fn bits(self) -> impl Iterator<Item = usize> {
        (0..Self::COUNT).filter(move |b| self.0 & (1 << b) != 0)
    }

    pub fn count(self) -> usize {
        self.0.count_ones() as usize
    }
}

impl std::ops::BitOr for AffordanceMask {
    type Output = AffordanceMask;
    fn bitor(self, rhs: AffordanceMask) -> AffordanceMask {
        self.union(rhs)
    }
}

/// Affordance classes in the semantic index space.
///
/// The representation stacks object classes first, then these, so the
/// semantic index of an affordance is `n_object_classes + affordance as usize`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Affordance {
    Navigable = 0,
    Pickupable = 1,
    Receptacle = 2,
    Openable = 3,
    Closeable = 4,
    ToggleableOn = 5,
    ToggleableOff = 6,
    Sliceable = 7,
}

impl Affordance {
    pub const ALL: [Affordance; 8] = [
        Affordance::Navigable,
        Affordance::Pickupable,
        Affordance::Receptacle,
        Affordance::Openable,
        Affordance::Closeable,
        Affordance::ToggleableOn,
        Affordance::ToggleableOff,
        Affordance::Sliceable,
    ];

    /// Number of affordance classes, navigation included.
    pub const COUNT: usize = 8;

    /// Affordance class for interaction bit `bit` of an [`AffordanceMask`].
    pub fn from_bit(bit: usize) -> Affordance {
        Self::ALL[bit + 1]
    }

    pub fn mask(self) -> AffordanceMask {
        match self {
            Affordance::Navigable => AffordanceMask::NONE,
            other => AffordanceMask(1 << (other as u8 - 1)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Affordance::Navigable => "Navigable",
            Affordance::Pickupable => "Pickupable",
            Affordance::Receptacle => "Receptacle",
            Affordance::Openable => "Openable",
            Affordance::Closeable => "Closeable",
            Affordance::ToggleableOn => "ToggleableOn",
            Affordance::ToggleableOff => "ToggleableOff",
            Affordance::Sliceable => "Sliceable",
        }
    }
}

/// Whether instances stand on their own cell or are carried around.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassKind {
    /// Furniture and appliances; one cell each, marked as receptacle surface.
    Fixed,
    /// Portable objects resting on a floor cell or inside a receptacle.
    Small,
}

/// State change an appliance applies to its contents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ApplianceEffect {
    /// Heats contents when switched off after running.
    Heat,
    /// Cools contents when the door is closed.
    Cool,
    /// Cleans contents when the tap is switched on.
    Clean,
    /// Light source used by examine tasks.
    Light,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassInfo {
    pub name: String,
    pub kind: ClassKind,
    /// Static capability flags. Openable classes carry both OPENABLE and
    /// CLOSEABLE; toggleable classes carry both TOGGLEABLE bits.
    pub affordances: AffordanceMask,
    /// Vertical extent in meters (bottom, top) for fixed classes; small
    /// objects use `(0, top)` relative to whatever supports them.
    pub height: (f64, f64),
    pub effect: Option<ApplianceEffect>,
    /// Open-top surface usable as a generic put target.
    pub surface: bool,
    /// Holding an instance enables `Slice`.
    pub slicer: bool,
}

/// The class roster shared by scenes, perception and the representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub classes: Vec<ClassInfo>,
}

impl Catalog {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// Object classes plus affordance classes.
    pub fn n_semantic(&self) -> usize {
        self.classes.len() + Affordance::COUNT
    }

    pub fn affordance_index(&self, a: Affordance) -> usize {
        self.classes.len() + a as usize
    }

    pub fn get(&self, id: ClassId) -> &ClassInfo {
        &self.classes[id]
    }

    pub fn name(&self, id: ClassId) -> &str {
        &self.classes[id].name
    }

    pub fn id(&self, name: &str) -> Option<ClassId> {
        self.classes.iter().position(|c| c.name == name)
    }

    /// Human-readable name of a semantic index.
    pub fn semantic_name(&self, index: usize) -> &str {
        if index < self.classes.len() {
            &self.classes[index].name
        } else {
            Affordance::ALL[index - self.classes.len()].name()
        }
    }

    pub fn with_effect(&self, effect: ApplianceEffect) -> Option<ClassId> {
        self.classes.iter().position(|c| c.effect == Some(effect))
    }

    pub fn slicer(&self) -> Option<ClassId> {
        self.classes.iter().position(|c| c.slicer)
    }

    pub fn surfaces(&self) -> impl Iterator<Item = ClassId> + '_ {
        self.classes
            .iter()
            .enumerate()
            .filter(|(_, c)| c.surface)
            .map(|(i, _)| i)
    }
}

impl Default for Catalog {
    /// Twenty household classes: nine fixed, eleven small.
    fn default() -> Self {
        use AffordanceMask as A;
        let open = A::OPENABLE | A::CLOSEABLE;
        let toggle = A::TOGGLEABLE_ON | A::TOGGLEABLE_OFF;
        let fixed = |name: &str, aff: AffordanceMask, top: f64, effect, surface| ClassInfo {
            name: name.to_string(),
            kind: ClassKind::Fixed,
            affordances: aff,
            height: (0.0, top),
            effect,
            surface,
            slicer: false,
        };
        let small = |name: &str, aff: AffordanceMask| ClassInfo {
            name: name.to_string(),
            kind: ClassKind::Small,
            affordances: aff,
            height: (0.0, 0.15),
            effect: None,
            surface: false,
            slicer: false,
        };
        let mut classes = vec![
            fixed("DiningTable", A::RECEPTACLE, 0.8, None, true),
            fixed("CounterTop", A::RECEPTACLE, 0.9, None, true),
            fixed(
                "Fridge",
                A::RECEPTACLE | open,
                1.8,
                Some(ApplianceEffect::Cool),
                false,
            ),
            fixed(
                "Microwave",
                A::RECEPTACLE | open | toggle,
                1.2,
                Some(ApplianceEffect::Heat),
                false,
            ),
            fixed(
                "SinkBasin",
                A::RECEPTACLE | toggle,
                0.9,
                Some(ApplianceEffect::Clean),
                false,
            ),
            fixed("StoveBurner", A::RECEPTACLE, 0.9, None, false),
            fixed("Drawer", A::RECEPTACLE | open, 0.7, None, false),
            fixed("GarbageCan", A::RECEPTACLE, 0.4, None, false),
            fixed(
                "FloorLamp",
                toggle,
                1.6,
                Some(ApplianceEffect::Light),
                false,
            ),
            small("Apple", A::PICKUPABLE | A::SLICEABLE),
            small("Egg", A::PICKUPABLE),
            small("Lettuce", A::PICKUPABLE | A::SLICEABLE),
            small("Tomato", A::PICKUPABLE | A::SLICEABLE),
            small("Potato", A::PICKUPABLE | A::SLICEABLE),
            small("Mug", A::PICKUPABLE | A::RECEPTACLE),
            small("Bowl", A::PICKUPABLE | A::RECEPTACLE),
            small("Pot", A::PICKUPABLE | A::RECEPTACLE),
            small("Knife", A::PICKUPABLE),
            small("Book", A::PICKUPABLE),
            small("Cloth", A::PICKUPABLE),
        ];
        classes[17].slicer = true;
        Catalog { classes }
    }
}

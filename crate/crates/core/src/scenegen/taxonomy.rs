//! Object categories as compositions of primitives.

use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::primitive::{sample_primitive, PrimitiveKind, PrimitiveSpec, Shape};
use super::scene::SplitSpec;
use crate::error::{Error, Result};
use crate::numerics::Rng64;

/// One primitive of a category, with per-instance jitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartTemplate {
    #[serde(flatten)]
    pub primitive: PrimitiveSpec,
    /// Relative size jitter: every dimension is scaled by `1 + U(-j, j)`.
    #[serde(default)]
    pub size_jitter: f64,
    /// Horizontal offset jitter in meters.
    #[serde(default)]
    pub offset_jitter: f64,
}

impl PartTemplate {
    pub fn new(shape: Shape, translation: [f64; 3], budget: usize) -> Self {
        Self {
            primitive: PrimitiveSpec::new(shape, translation, 0.0, budget),
            size_jitter: 0.05,
            offset_jitter: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryTemplate {
    pub name: String,
    #[serde(rename = "part")]
    pub parts: Vec<PartTemplate>,
}

impl CategoryTemplate {
    pub fn validate(&self) -> Result<()> {
        if self.parts.is_empty() {
            return Err(Error::Config(format!("category '{}' has no parts", self.name)));
        }
        for p in &self.parts {
            p.primitive.validate().map_err(|e| {
                Error::Config(format!("category '{}': {e}", self.name))
            })?;
            if !(0.0..1.0).contains(&p.size_jitter) || !(p.offset_jitter >= 0.0) {
                return Err(Error::Config(format!(
                    "category '{}': jitter out of range (size {}, offset {})",
                    self.name, p.size_jitter, p.offset_jitter
                )));
            }
        }
        Ok(())
    }

    pub fn point_budget(&self) -> usize {
        self.parts.iter().map(|p| p.primitive.point_budget).sum()
    }

    /// Fraction of the category's points contributed by each primitive kind,
    /// indexed by [`PrimitiveKind::index`]. Derived from part budgets.
    pub fn mixture(&self) -> [f64; PrimitiveKind::COUNT] {
        let total = self.point_budget() as f64;
        let mut m = [0.0; PrimitiveKind::COUNT];
        for p in &self.parts {
            m[p.primitive.kind().index()] += p.primitive.point_budget as f64;
        }
        m.map(|v| v / total)
    }

    /// Samples one jittered instance in the object's local frame
    /// (origin on the floor below the object's centre).
    pub fn instantiate(&self, rng: &mut Rng64) -> Result<Vec<[f64; 3]>> {
        let mut points = Vec::with_capacity(self.point_budget());
        for part in &self.parts {
            let mut spec = part.primitive;
            if part.size_jitter > 0.0 {
                let f = 1.0 + rng.random_range(-part.size_jitter..=part.size_jitter);
                spec.shape = spec.shape.scaled(f);
            }
            if part.offset_jitter > 0.0 {
                spec.translation[0] += rng.random_range(-part.offset_jitter..=part.offset_jitter);
                spec.translation[1] += rng.random_range(-part.offset_jitter..=part.offset_jitter);
            }
            points.extend(sample_primitive(&spec, rng)?);
        }
        Ok(points)
    }
}

/// Dot product of two primitive mixtures.
pub fn mixture_overlap(a: &[f64; PrimitiveKind::COUNT], b: &[f64; PrimitiveKind::COUNT]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Taxonomy {
    #[serde(rename = "category")]
    pub categories: Vec<CategoryTemplate>,
}

impl Taxonomy {
    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.categories.iter().map(|c| c.name.clone()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.categories.iter().position(|c| c.name == name)
    }

    pub fn validate(&self) -> Result<()> {
        if self.categories.is_empty() {
            return Err(Error::Config("taxonomy has no categories".into()));
        }
        for c in &self.categories {
            c.validate()?;
        }
        Ok(())
    }

    /// `C x 6` matrix of primitive mixtures.
    pub fn mixture_matrix(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.len(), PrimitiveKind::COUNT));
        for (i, c) in self.categories.iter().enumerate() {
            for (j, v) in c.mixture().into_iter().enumerate() {
                m[[i, j]] = v;
            }
        }
        m
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("serializing taxonomy: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let t: Taxonomy = toml::from_str(text).map_err(|e| Error::Parse {
            location: "taxonomy".into(),
            message: e.to_string(),
        })?;
        t.validate()?;
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse {
                location: path.display().to_string(),
                message,
            },
            other => other,
        })
    }
}

/// The shipped taxonomy plus its recommended split.
#[derive(Debug, Clone, PartialEq)]
pub struct DefaultTaxonomy {
    pub taxonomy: Taxonomy,
    pub split: SplitSpec,
    /// `(unseen, seen)` pairs whose primitive mixtures deliberately overlap.
    pub analogs: Vec<(usize, usize)>,
}

fn cuboid(x: f64, y: f64, z: f64) -> Shape {
    Shape::Cuboid { size: [x, y, z] }
}

fn cylinder(radius: f64, height: f64) -> Shape {
    Shape::Cylinder { radius, height }
}

fn cone(radius: f64, height: f64) -> Shape {
    Shape::Cone { radius, height }
}

/// Ten indoor-style categories over all six primitive kinds.
///
/// `desk` (held out) shares the cuboid-plus-cylinder build of `table`, and
/// `shrub` (held out) shares the pot-plus-sphere build of `plant`. Held-out
/// categories are sampled more sparsely than the seen ones.
pub fn default_taxonomy() -> DefaultTaxonomy {
    let legs = |r: f64, h: f64, dx: f64, dy: f64, budget: usize, shape: fn(f64, f64) -> Shape| {
        [(-dx, -dy), (-dx, dy), (dx, -dy), (dx, dy)]
            .map(|(x, y)| PartTemplate::new(shape(r, h), [x, y, h / 2.0], budget))
    };

    let mut table = vec![PartTemplate::new(cuboid(1.2, 0.8, 0.05), [0.0, 0.0, 0.725], 240)];
    table.extend(legs(0.03, 0.7, 0.55, 0.35, 40, cylinder));

    let desk = vec![
        PartTemplate::new(cuboid(1.4, 0.7, 0.05), [0.0, 0.0, 0.9], 48),
        PartTemplate::new(cuboid(0.45, 0.6, 0.85), [0.45, 0.0, 0.425], 24),
        PartTemplate::new(cylinder(0.04, 0.875), [-0.62, -0.28, 0.4375], 12),
        PartTemplate::new(cylinder(0.04, 0.875), [-0.62, 0.28, 0.4375], 12),
    ];

    let mut chair = vec![
        PartTemplate::new(cuboid(0.45, 0.45, 0.05), [0.0, 0.0, 0.45], 90),
        PartTemplate::new(cuboid(0.45, 0.04, 0.45), [0.0, -0.2, 0.7], 80),
    ];
    chair.extend(legs(0.03, 0.43, 0.19, 0.19, 30, cone));

    let bin = vec![
        PartTemplate::new(cylinder(0.18, 0.5), [0.0, 0.0, 0.25], 220),
        PartTemplate::new(
            Shape::Torus { major_radius: 0.18, minor_radius: 0.015 },
            [0.0, 0.0, 0.5],
            60,
        ),
    ];

    let shrub = vec![
        PartTemplate::new(cylinder(0.12, 0.5), [0.0, 0.0, 0.25], 20),
        PartTemplate::new(Shape::Sphere { radius: 0.22 }, [0.0, 0.0, 0.72], 40),
    ];

    let lamp = vec![
        PartTemplate::new(cylinder(0.15, 0.03), [0.0, 0.0, 0.015], 40),
        PartTemplate::new(cylinder(0.015, 1.4), [0.0, 0.0, 0.73], 60),
        PartTemplate::new(cone(0.25, 0.3), [0.0, 0.0, 1.45], 180),
        PartTemplate::new(Shape::Sphere { radius: 0.06 }, [0.0, 0.0, 1.38], 40),
    ];

    let globe = vec![
        PartTemplate::new(Shape::Sphere { radius: 0.3 }, [0.0, 0.0, 0.9], 250),
        PartTemplate::new(cylinder(0.02, 0.6), [0.0, 0.0, 0.4], 50),
        PartTemplate::new(cone(0.2, 0.1), [0.0, 0.0, 0.05], 40),
    ];

    let tent = vec![PartTemplate::new(
        Shape::Pyramid { base: [2.0, 2.0], height: 1.5 },
        [0.0, 0.0, 0.75],
        360,
    )];

    let plant = vec![
        PartTemplate::new(cylinder(0.15, 0.35), [0.0, 0.0, 0.175], 100),
        PartTemplate::new(Shape::Sphere { radius: 0.3 }, [0.0, 0.0, 0.65], 200),
    ];

    let tire = vec![PartTemplate::new(
        Shape::Torus { major_radius: 0.3, minor_radius: 0.12 },
        [0.0, 0.0, 0.12],
        250,
    )];

    let categories = [
        ("table", table),
        ("desk", desk),
        ("chair", chair),
        ("bin", bin),
        ("shrub", shrub),
        ("lamp", lamp),
        ("globe", globe),
        ("tent", tent),
        ("plant", plant),
        ("tire", tire),
    ]
    .into_iter()
    .map(|(name, parts)| CategoryTemplate {
        name: name.to_string(),
        parts,
    })
    .collect();

    let taxonomy = Taxonomy { categories };
    let desk = taxonomy.index_of("desk").unwrap();
    let shrub = taxonomy.index_of("shrub").unwrap();
    let split = SplitSpec::holding_out(taxonomy.len(), &[desk, shrub]).unwrap();
    DefaultTaxonomy {
        analogs: vec![
            (desk, taxonomy.index_of("table").unwrap()),
            (shrub, taxonomy.index_of("plant").unwrap()),
        ],
        taxonomy,
        split,
    }
}

//! A priori landmark map, its text format, and distance-keyed pair lookup.
//!
//! Map documents are UTF-8, one landmark per line as `LABEL x y`, with `#`
//! starting a comment. Landmark ids follow file order.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector2;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: duplicate landmark {label} at ({x}, {y})")]
    DuplicateLandmark {
        line: usize,
        label: LandmarkLabel,
        x: f64,
        y: f64,
    },
    #[error("landmarks {first} and {second} coincide")]
    CoincidentLandmarks { first: usize, second: usize },
    #[error("map contains no landmarks")]
    Empty,
    #[error("invalid error bands: {0}")]
    InvalidBands(String),
}

/// Field feature class. The derived order (L < T < X < G) fixes the
/// canonical key for label pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LandmarkLabel {
    /// `L`
    Corner,
    /// `T`
    Tee,
    /// `X`
    Cross,
    /// `G`
    GoalPost,
}

impl LandmarkLabel {
    pub const ALL: [LandmarkLabel; 4] = [
        LandmarkLabel::Corner,
        LandmarkLabel::Tee,
        LandmarkLabel::Cross,
        LandmarkLabel::GoalPost,
    ];

    pub fn as_char(self) -> char {
        match self {
            LandmarkLabel::Corner => 'L',
            LandmarkLabel::Tee => 'T',
            LandmarkLabel::Cross => 'X',
            LandmarkLabel::GoalPost => 'G',
        }
    }
}

impl fmt::Display for LandmarkLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

impl FromStr for LandmarkLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "L" => Ok(LandmarkLabel::Corner),
            "T" => Ok(LandmarkLabel::Tee),
            "X" => Ok(LandmarkLabel::Cross),
            "G" => Ok(LandmarkLabel::GoalPost),
            other => Err(format!("unknown landmark label {other:?} (expected L, T, X or G)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapLandmark {
    pub id: usize,
    pub label: LandmarkLabel,
    pub position: Vector2<f64>,
}

impl MapLandmark {
    pub fn new(id: usize, label: LandmarkLabel, x: f64, y: f64) -> Self {
        Self {
            id,
            label,
            position: Vector2::new(x, y),
        }
    }
}

/// One unordered landmark pair stored under its canonical label key:
/// `first` carries the lower label (or the lower id when labels tie).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexedPair {
    pub first: usize,
    pub second: usize,
    pub distance: f64,
}

/// Distance-banded fractional error: a distance below `bands[i].0` has
/// fractional error `bands[i].1`. The last band covers everything beyond.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorBands {
    bands: Vec<(f64, f64)>,
}

impl ErrorBands {
    pub fn new(bands: Vec<(f64, f64)>) -> Result<Self, MapError> {
        if bands.is_empty() {
            return Err(MapError::InvalidBands("at least one band required".into()));
        }
        for w in bands.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(MapError::InvalidBands(format!(
                    "band limits must strictly increase ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        if let Some(&(d, f)) = bands.iter().find(|(d, f)| !(0.0..=0.5).contains(f) || d.is_nan()) {
            return Err(MapError::InvalidBands(format!("band ({d}, {f}) out of range")));
        }
        Ok(Self { bands })
    }

    /// (<2 m: 1%), (<4 m: 3%), (<6 m: 5%), (<8 m: 8%), (beyond: 10%).
    pub fn perception_default() -> Self {
        Self {
            bands: vec![
                (2.0, 0.01),
                (4.0, 0.03),
                (6.0, 0.05),
                (8.0, 0.08),
                (f64::INFINITY, 0.10),
            ],
        }
    }

    pub fn bands(&self) -> &[(f64, f64)] {
        &self.bands
    }

    pub fn fraction_at(&self, distance: f64) -> f64 {
        self.bands
            .iter()
            .find(|(limit, _)| distance < *limit)
            .or(self.bands.last())
            .map(|&(_, f)| f)
            .unwrap_or(0.0)
    }
}

/// Allowed slack between a measured and a mapped pair distance.
#[derive(Debug, Clone, PartialEq)]
pub enum MatchTolerance {
    /// Constant slack; `f64::INFINITY` admits every pair.
    Fixed(f64),
    /// `max(floor, scale · band(d) · d)`
    Banded {
        floor: f64,
        scale: f64,
        bands: ErrorBands,
    },
}

impl Default for MatchTolerance {
    fn default() -> Self {
        MatchTolerance::Banded {
            floor: 0.2,
            scale: 2.0,
            bands: ErrorBands::perception_default(),
        }
    }
}

impl MatchTolerance {
    pub fn slack(&self, measured_distance: f64) -> f64 {
        match self {
            MatchTolerance::Fixed(s) => *s,
            MatchTolerance::Banded {
                floor,
                scale,
                bands,
            } => floor.max(scale * bands.fraction_at(measured_distance) * measured_distance),
        }
    }
}

impl FromStr for MatchTolerance {
    type Err = String;

    /// `banded`, `inf`, or a fixed slack in meters.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "banded" => Ok(MatchTolerance::default()),
            "inf" | "infinity" => Ok(MatchTolerance::Fixed(f64::INFINITY)),
            v => {
                let slack: f64 = v
                    .parse()
                    .map_err(|_| format!("tolerance {v:?} is neither `banded` nor a number"))?;
                if slack.is_nan() || slack < 0.0 {
                    return Err(format!("tolerance must be nonnegative, got {slack}"));
                }
                Ok(MatchTolerance::Fixed(slack))
            }
        }
    }
}

type LabelKey = (LandmarkLabel, LandmarkLabel);

fn canonical_key(a: LandmarkLabel, b: LandmarkLabel) -> LabelKey {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Immutable landmark map with a pair index built at construction.
#[derive(Debug, Clone)]
pub struct FieldMap {
    landmarks: Vec<MapLandmark>,
    /// Entries under each key are sorted by distance.
    pair_index: BTreeMap<LabelKey, Vec<IndexedPair>>,
}

impl PartialEq for FieldMap {
    fn eq(&self, other: &Self) -> bool {
        self.landmarks == other.landmarks
    }
}

impl FieldMap {
    /// Build a map from `(label, x, y)` entries; ids follow input order.
    pub fn from_landmarks<I>(entries: I) -> Result<Self, MapError>
    where
        I: IntoIterator<Item = (LandmarkLabel, f64, f64)>,
    {
        let landmarks: Vec<MapLandmark> = entries
            .into_iter()
            .enumerate()
            .map(|(id, (label, x, y))| MapLandmark::new(id, label, x, y))
            .collect();
        let mut seen = HashSet::new();
        for lm in &landmarks {
            if !seen.insert((lm.label, lm.position.x.to_bits(), lm.position.y.to_bits())) {
                return Err(MapError::DuplicateLandmark {
                    line: lm.id + 1,
                    label: lm.label,
                    x: lm.position.x,
                    y: lm.position.y,
                });
            }
        }
        Self::build(landmarks)
    }

    fn build(landmarks: Vec<MapLandmark>) -> Result<Self, MapError> {
        if landmarks.is_empty() {
            return Err(MapError::Empty);
        }
        let mut pair_index: BTreeMap<LabelKey, Vec<IndexedPair>> = BTreeMap::new();
        for (i, a) in landmarks.iter().enumerate() {
            for b in &landmarks[i + 1..] {
                let distance = (b.position - a.position).norm();
                if !(distance > 0.0) {
                    return Err(MapError::CoincidentLandmarks {
                        first: a.id,
                        second: b.id,
                    });
                }
                let (first, second) = if a.label <= b.label { (a, b) } else { (b, a) };
                pair_index
                    .entry(canonical_key(a.label, b.label))
                    .or_default()
                    .push(IndexedPair {
                        first: first.id,
                        second: second.id,
                        distance,
                    });
            }
        }
        for pairs in pair_index.values_mut() {
            pairs.sort_by(|p, q| {
                p.distance
                    .total_cmp(&q.distance)
                    .then((p.first, p.second).cmp(&(q.first, q.second)))
            });
        }
        Ok(Self {
            landmarks,
            pair_index,
        })
    }

    pub fn landmarks(&self) -> &[MapLandmark] {
        &self.landmarks
    }

    pub fn len(&self) -> usize {
        self.landmarks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.landmarks.is_empty()
    }

    pub fn landmark(&self, id: usize) -> Option<&MapLandmark> {
        self.landmarks.get(id)
    }

    pub fn pairs(&self, a: LandmarkLabel, b: LandmarkLabel) -> &[IndexedPair] {
        self.pair_index
            .get(&canonical_key(a, b))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn pair_count(&self) -> usize {
        self.pair_index.values().map(Vec::len).sum()
    }

    /// Axis-aligned bounds `(min, max)` of all landmark positions.
    pub fn bounds(&self) -> (Vector2<f64>, Vector2<f64>) {
        let mut lo = Vector2::repeat(f64::INFINITY);
        let mut hi = Vector2::repeat(f64::NEG_INFINITY);
        for lm in &self.landmarks {
            lo = lo.inf(&lm.position);
            hi = hi.sup(&lm.position);
        }
        (lo, hi)
    }

    /// Ordered world pairs `(p, q)` with `p.label == a`, `q.label == b` and
    /// `|dist(p, q) - measured| <= tol(measured)`, sorted by `(p.id, q.id)`.
    /// Same-label patterns yield both orderings of each matching pair.
    pub fn match_pairs(
        &self,
        a: LandmarkLabel,
        b: LandmarkLabel,
        measured_distance: f64,
        tol: &MatchTolerance,
    ) -> Vec<(&MapLandmark, &MapLandmark)> {
        let slack = tol.slack(measured_distance);
        let pairs = self.pairs(a, b);
        let lo = pairs.partition_point(|p| p.distance < measured_distance - slack);
        let hi = pairs.partition_point(|p| p.distance <= measured_distance + slack);
        let mut out = Vec::with_capacity(2 * hi.saturating_sub(lo));
        for p in &pairs[lo..hi.max(lo)] {
            let first = &self.landmarks[p.first];
            let second = &self.landmarks[p.second];
            if a == b {
                out.push((first, second));
                out.push((second, first));
            } else if a < b {
                out.push((first, second));
            } else {
                out.push((second, first));
            }
        }
        out.sort_by_key(|(p, q)| (p.id, q.id));
        out
    }

    /// Serialize to the map text format. Loading the output reproduces this
    /// map bit-for-bit.
    pub fn to_map_string(&self) -> String {
        let mut out = String::from("# label x y\n");
        for lm in &self.landmarks {
            out.push_str(&format!("{} {} {}\n", lm.label, lm.position.x, lm.position.y));
        }
        out
    }
}

/// Parse a map document.
pub fn load_field_map(text: &str) -> Result<FieldMap, MapError> {
    let mut landmarks = Vec::new();
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        let [label, x, y] = fields.as_slice() else {
            return Err(MapError::Parse {
                line: line_no,
                message: format!("expected `LABEL x y`, got {content:?}"),
            });
        };
        let label: LandmarkLabel = label.parse().map_err(|message| MapError::Parse {
            line: line_no,
            message,
        })?;
        let x = parse_coordinate(x, line_no)?;
        let y = parse_coordinate(y, line_no)?;
        if !seen.insert((label, x.to_bits(), y.to_bits())) {
            return Err(MapError::DuplicateLandmark {
                line: line_no,
                label,
                x,
                y,
            });
        }
        landmarks.push(MapLandmark::new(landmarks.len(), label, x, y));
    }
    FieldMap::build(landmarks)
}

fn parse_coordinate(token: &str, line: usize) -> Result<f64, MapError> {
    match token.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(MapError::Parse {
            line,
            message: format!("invalid coordinate {token:?}"),
        }),
    }
}

/// Map text for the built-in adult-size field.
pub const ADULT_FIELD_MAP: &str = include_str!("../data/adult_field.map");

/// 14 m × 9 m adult-size field, origin at the center, x toward a goal.
pub fn default_adult_field() -> FieldMap {
    load_field_map(ADULT_FIELD_MAP).expect("built-in map is valid")
}

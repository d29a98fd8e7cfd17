//! Abstraction of concrete runtime values into a finite class alphabet, and
//! concretization of classes back into injectable values.
//!
//! The fine alphabet has 22 classes (sign-split numbers, emptiness-split
//! strings and containers); the coarse alphabet merges each family into a
//! single class, 12 in total. Concretization is deterministic except for the
//! coarse randomized mode, which picks uniformly from a small per-class pool.

use rand::Rng;
use serde::{Deserialize, Serialize};

use lexec_lang::value::DummyObj;
use lexec_lang::Value;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Fine,
    Coarse,
}

impl Granularity {
    pub fn as_str(self) -> &'static str {
        match self {
            Granularity::Fine => "fine",
            Granularity::Coarse => "coarse",
        }
    }

    pub fn parse(s: &str) -> Option<Granularity> {
        match s {
            "fine" => Some(Granularity::Fine),
            "coarse" => Some(Granularity::Coarse),
            _ => None,
        }
    }
}

impl std::fmt::Display for Granularity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum FineClass {
    None,
    True,
    False,
    IntNeg,
    IntZero,
    IntPos,
    FloatNeg,
    FloatZero,
    FloatPos,
    StrEmpty,
    StrNonempty,
    ListEmpty,
    ListNonempty,
    TupleEmpty,
    TupleNonempty,
    SetEmpty,
    SetNonempty,
    DictEmpty,
    DictNonempty,
    Callable,
    Resource,
    Object,
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum CoarseClass {
    None,
    Boolean,
    Integer,
    Float,
    String,
    List,
    Tuple,
    Set,
    Dictionary,
    Callable,
    Resource,
    Object,
}

/// Table order of the fine catalog.
pub const FINE_CATALOG: [FineClass; 22] = [
    FineClass::None,
    FineClass::True,
    FineClass::False,
    FineClass::IntNeg,
    FineClass::IntZero,
    FineClass::IntPos,
    FineClass::FloatNeg,
    FineClass::FloatZero,
    FineClass::FloatPos,
    FineClass::StrEmpty,
    FineClass::StrNonempty,
    FineClass::ListEmpty,
    FineClass::ListNonempty,
    FineClass::TupleEmpty,
    FineClass::TupleNonempty,
    FineClass::SetEmpty,
    FineClass::SetNonempty,
    FineClass::DictEmpty,
    FineClass::DictNonempty,
    FineClass::Callable,
    FineClass::Resource,
    FineClass::Object,
];

/// Table order of the coarse catalog.
pub const COARSE_CATALOG: [CoarseClass; 12] = [
    CoarseClass::None,
    CoarseClass::Boolean,
    CoarseClass::Integer,
    CoarseClass::Float,
    CoarseClass::String,
    CoarseClass::List,
    CoarseClass::Tuple,
    CoarseClass::Set,
    CoarseClass::Dictionary,
    CoarseClass::Callable,
    CoarseClass::Resource,
    CoarseClass::Object,
];

impl FineClass {
    pub fn label(self) -> &'static str {
        match self {
            FineClass::None => "none",
            FineClass::True => "true",
            FineClass::False => "false",
            FineClass::IntNeg => "int_neg",
            FineClass::IntZero => "int_zero",
            FineClass::IntPos => "int_pos",
            FineClass::FloatNeg => "float_neg",
            FineClass::FloatZero => "float_zero",
            FineClass::FloatPos => "float_pos",
            FineClass::StrEmpty => "str_empty",
            FineClass::StrNonempty => "str_nonempty",
            FineClass::ListEmpty => "list_empty",
            FineClass::ListNonempty => "list_nonempty",
            FineClass::TupleEmpty => "tuple_empty",
            FineClass::TupleNonempty => "tuple_nonempty",
            FineClass::SetEmpty => "set_empty",
            FineClass::SetNonempty => "set_nonempty",
            FineClass::DictEmpty => "dict_empty",
            FineClass::DictNonempty => "dict_nonempty",
            FineClass::Callable => "callable",
            FineClass::Resource => "resource",
            FineClass::Object => "object",
        }
    }

    pub fn from_label(s: &str) -> Option<FineClass> {
        FINE_CATALOG.iter().copied().find(|c| c.label() == s)
    }
}

impl CoarseClass {
    pub fn label(self) -> &'static str {
        match self {
            CoarseClass::None => "none",
            CoarseClass::Boolean => "boolean",
            CoarseClass::Integer => "integer",
            CoarseClass::Float => "float",
            CoarseClass::String => "string",
            CoarseClass::List => "list",
            CoarseClass::Tuple => "tuple",
            CoarseClass::Set => "set",
            CoarseClass::Dictionary => "dictionary",
            CoarseClass::Callable => "callable",
            CoarseClass::Resource => "resource",
            CoarseClass::Object => "object",
        }
    }

    pub fn from_label(s: &str) -> Option<CoarseClass> {
        COARSE_CATALOG.iter().copied().find(|c| c.label() == s)
    }
}

/// A class in either alphabet; the predictor's output vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AbstractClass {
    Fine(FineClass),
    Coarse(CoarseClass),
}

impl AbstractClass {
    pub fn granularity(self) -> Granularity {
        match self {
            AbstractClass::Fine(_) => Granularity::Fine,
            AbstractClass::Coarse(_) => Granularity::Coarse,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AbstractClass::Fine(c) => c.label(),
            AbstractClass::Coarse(c) => c.label(),
        }
    }

    pub fn from_label(granularity: Granularity, s: &str) -> Option<AbstractClass> {
        match granularity {
            Granularity::Fine => FineClass::from_label(s).map(AbstractClass::Fine),
            Granularity::Coarse => CoarseClass::from_label(s).map(AbstractClass::Coarse),
        }
    }
}

impl std::fmt::Display for AbstractClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Full catalog for one granularity, in table order.
pub fn catalog(granularity: Granularity) -> Vec<AbstractClass> {
    match granularity {
        Granularity::Fine => FINE_CATALOG.iter().copied().map(AbstractClass::Fine).collect(),
        Granularity::Coarse => COARSE_CATALOG
            .iter()
            .copied()
            .map(AbstractClass::Coarse)
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConcretizationMode {
    Deterministic,
    Randomized,
}

impl ConcretizationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ConcretizationMode::Deterministic => "det",
            ConcretizationMode::Randomized => "rand",
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum AbstractionError {
    #[error("randomized concretization requires coarse granularity")]
    RandomizedRequiresCoarse,
}

/// Classifies any runtime value. Total: unclassifiable values fall to
/// `object`.
pub fn abstract_value(v: &Value, granularity: Granularity) -> AbstractClass {
    let fine = abstract_fine(v);
    match granularity {
        Granularity::Fine => AbstractClass::Fine(fine),
        Granularity::Coarse => AbstractClass::Coarse(coarsen(fine)),
    }
}

pub fn abstract_fine(v: &Value) -> FineClass {
    match v {
        Value::None => FineClass::None,
        // Booleans classify before the integer family even on hosts where
        // they are numeric.
        Value::Bool(true) => FineClass::True,
        Value::Bool(false) => FineClass::False,
        Value::Int(i) => match i.cmp(&0) {
            std::cmp::Ordering::Less => FineClass::IntNeg,
            std::cmp::Ordering::Equal => FineClass::IntZero,
            std::cmp::Ordering::Greater => FineClass::IntPos,
        },
        Value::Float(f) => {
            // -0.0 counts as zero; NaN and +inf fall to positive, -inf to
            // negative: any deterministic total rule suffices here.
            if *f == 0.0 {
                FineClass::FloatZero
            } else if *f < 0.0 {
                FineClass::FloatNeg
            } else {
                FineClass::FloatPos
            }
        }
        Value::Str(s) => {
            if s.is_empty() {
                FineClass::StrEmpty
            } else {
                FineClass::StrNonempty
            }
        }
        Value::List(l) => {
            if l.borrow().is_empty() {
                FineClass::ListEmpty
            } else {
                FineClass::ListNonempty
            }
        }
        Value::Tuple(t) => {
            if t.is_empty() {
                FineClass::TupleEmpty
            } else {
                FineClass::TupleNonempty
            }
        }
        Value::Set(s) => {
            if s.borrow().is_empty() {
                FineClass::SetEmpty
            } else {
                FineClass::SetNonempty
            }
        }
        Value::Dict(d) => {
            if d.borrow().is_empty() {
                FineClass::DictEmpty
            } else {
                FineClass::DictNonempty
            }
        }
        Value::Function(_)
        | Value::Lambda(_)
        | Value::Builtin(_)
        | Value::ExcType(_)
        | Value::DummyCallable(_) => FineClass::Callable,
        Value::DummyResource(_) => FineClass::Resource,
        Value::Dummy(_) | Value::Exception(_) | Value::Range(_) => FineClass::Object,
    }
}

pub fn coarsen(c: FineClass) -> CoarseClass {
    match c {
        FineClass::None => CoarseClass::None,
        FineClass::True | FineClass::False => CoarseClass::Boolean,
        FineClass::IntNeg | FineClass::IntZero | FineClass::IntPos => CoarseClass::Integer,
        FineClass::FloatNeg | FineClass::FloatZero | FineClass::FloatPos => CoarseClass::Float,
        FineClass::StrEmpty | FineClass::StrNonempty => CoarseClass::String,
        FineClass::ListEmpty | FineClass::ListNonempty => CoarseClass::List,
        FineClass::TupleEmpty | FineClass::TupleNonempty => CoarseClass::Tuple,
        FineClass::SetEmpty | FineClass::SetNonempty => CoarseClass::Set,
        FineClass::DictEmpty | FineClass::DictNonempty => CoarseClass::Dictionary,
        FineClass::Callable => CoarseClass::Callable,
        FineClass::Resource => CoarseClass::Resource,
        FineClass::Object => CoarseClass::Object,
    }
}

fn fresh_dummy() -> Value {
    Value::Dummy(DummyObj::fresh())
}

fn fresh_callable() -> Value {
    Value::DummyCallable(DummyObj::fresh())
}

fn fresh_resource() -> Value {
    Value::DummyResource(DummyObj::fresh())
}

fn nonempty_list() -> Value {
    Value::new_list(vec![fresh_dummy()])
}

fn nonempty_tuple() -> Value {
    Value::new_tuple(vec![fresh_dummy()])
}

fn nonempty_set() -> Value {
    let s = Value::empty_set();
    if let Value::Set(m) = &s {
        let d = fresh_dummy();
        let k = d.hash_key().expect("dummies are hashable");
        m.borrow_mut().insert(k, d);
    }
    s
}

fn nonempty_dict() -> Value {
    let d = Value::empty_dict();
    if let Value::Dict(m) = &d {
        let key = Value::str_value("a");
        let k = key.hash_key().expect("strings are hashable");
        m.borrow_mut().insert(k, (key, fresh_dummy()));
    }
    d
}

fn concretize_fine(c: FineClass) -> Value {
    match c {
        FineClass::None => Value::None,
        FineClass::True => Value::Bool(true),
        FineClass::False => Value::Bool(false),
        FineClass::IntNeg => Value::Int(-1),
        FineClass::IntZero => Value::Int(0),
        FineClass::IntPos => Value::Int(1),
        FineClass::FloatNeg => Value::Float(-1.0),
        FineClass::FloatZero => Value::Float(0.0),
        FineClass::FloatPos => Value::Float(1.0),
        FineClass::StrEmpty => Value::str_value(""),
        FineClass::StrNonempty => Value::str_value("a"),
        FineClass::ListEmpty => Value::new_list(Vec::new()),
        FineClass::ListNonempty => nonempty_list(),
        FineClass::TupleEmpty => Value::new_tuple(Vec::new()),
        FineClass::TupleNonempty => nonempty_tuple(),
        FineClass::SetEmpty => Value::empty_set(),
        FineClass::SetNonempty => nonempty_set(),
        FineClass::DictEmpty => Value::empty_dict(),
        FineClass::DictNonempty => nonempty_dict(),
        FineClass::Callable => fresh_callable(),
        FineClass::Resource => fresh_resource(),
        FineClass::Object => fresh_dummy(),
    }
}

fn concretize_coarse_det(c: CoarseClass) -> Value {
    match c {
        CoarseClass::None => Value::None,
        CoarseClass::Boolean => Value::Bool(true),
        CoarseClass::Integer => Value::Int(1),
        CoarseClass::Float => Value::Float(1.0),
        CoarseClass::String => Value::str_value("a"),
        CoarseClass::List => nonempty_list(),
        CoarseClass::Tuple => nonempty_tuple(),
        CoarseClass::Set => nonempty_set(),
        CoarseClass::Dictionary => nonempty_dict(),
        CoarseClass::Callable => fresh_callable(),
        CoarseClass::Resource => fresh_resource(),
        CoarseClass::Object => fresh_dummy(),
    }
}

fn concretize_coarse_rand<R: Rng>(c: CoarseClass, rng: &mut R) -> Value {
    fn pick<R: Rng>(rng: &mut R, options: &[fn() -> Value]) -> Value {
        options[rng.gen_range(0..options.len())]()
    }
    match c {
        CoarseClass::None => Value::None,
        CoarseClass::Boolean => pick(rng, &[|| Value::Bool(true), || Value::Bool(false)]),
        CoarseClass::Integer => pick(
            rng,
            &[|| Value::Int(-1), || Value::Int(0), || Value::Int(1)],
        ),
        CoarseClass::Float => pick(
            rng,
            &[
                || Value::Float(-1.0),
                || Value::Float(0.0),
                || Value::Float(1.0),
            ],
        ),
        CoarseClass::String => pick(rng, &[|| Value::str_value(""), || Value::str_value("a")]),
        CoarseClass::List => pick(rng, &[|| Value::new_list(Vec::new()), nonempty_list]),
        CoarseClass::Tuple => pick(rng, &[|| Value::new_tuple(Vec::new()), nonempty_tuple]),
        CoarseClass::Set => pick(rng, &[Value::empty_set, nonempty_set]),
        CoarseClass::Dictionary => pick(rng, &[Value::empty_dict, nonempty_dict]),
        CoarseClass::Callable => fresh_callable(),
        CoarseClass::Resource => fresh_resource(),
        CoarseClass::Object => fresh_dummy(),
    }
}

/// Maps an abstract class to an injectable runtime value.
pub fn concretize<R: Rng>(
    c: AbstractClass,
    mode: ConcretizationMode,
    rng: &mut R,
) -> Result<Value, AbstractionError> {
    match (c, mode) {
        (AbstractClass::Fine(f), ConcretizationMode::Deterministic) => Ok(concretize_fine(f)),
        (AbstractClass::Fine(_), ConcretizationMode::Randomized) => {
            Err(AbstractionError::RandomizedRequiresCoarse)
        }
        (AbstractClass::Coarse(cc), ConcretizationMode::Deterministic) => {
            Ok(concretize_coarse_det(cc))
        }
        (AbstractClass::Coarse(cc), ConcretizationMode::Randomized) => {
            Ok(concretize_coarse_rand(cc, rng))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn catalog_sizes_and_order() {
        assert_eq!(catalog(Granularity::Fine).len(), 22);
        assert_eq!(catalog(Granularity::Coarse).len(), 12);
        assert_eq!(catalog(Granularity::Fine)[0].label(), "none");
        assert_eq!(catalog(Granularity::Coarse)[1].label(), "boolean");
    }

    #[test]
    fn abstraction_examples() {
        assert_eq!(
            abstract_value(&Value::str_value(""), Granularity::Fine),
            AbstractClass::Fine(FineClass::StrEmpty)
        );
        assert_eq!(
            abstract_value(&Value::Int(-5), Granularity::Fine),
            AbstractClass::Fine(FineClass::IntNeg)
        );
        assert_eq!(
            abstract_value(&Value::Int(-5), Granularity::Coarse),
            AbstractClass::Coarse(CoarseClass::Integer)
        );
    }

    #[test]
    fn dummy_family_classification() {
        assert_eq!(
            abstract_fine(&Value::Dummy(DummyObj::fresh())),
            FineClass::Object
        );
        assert_eq!(
            abstract_fine(&Value::DummyCallable(DummyObj::fresh())),
            FineClass::Callable
        );
        assert_eq!(
            abstract_fine(&Value::DummyResource(DummyObj::fresh())),
            FineClass::Resource
        );
    }

    #[test]
    fn non_finite_floats_are_total() {
        assert_eq!(abstract_fine(&Value::Float(f64::INFINITY)), FineClass::FloatPos);
        assert_eq!(abstract_fine(&Value::Float(f64::NEG_INFINITY)), FineClass::FloatNeg);
        assert_eq!(abstract_fine(&Value::Float(f64::NAN)), FineClass::FloatPos);
        assert_eq!(abstract_fine(&Value::Float(-0.0)), FineClass::FloatZero);
    }

    #[test]
    fn fine_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for c in catalog(Granularity::Fine) {
            let v = concretize(c, ConcretizationMode::Deterministic, &mut rng).unwrap();
            assert_eq!(abstract_value(&v, Granularity::Fine), c, "round trip of {c}");
        }
    }

    #[test]
    fn coarse_round_trip_and_coarsen_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for c in catalog(Granularity::Coarse) {
            let v = concretize(c, ConcretizationMode::Deterministic, &mut rng).unwrap();
            assert_eq!(abstract_value(&v, Granularity::Coarse), c);
        }
        for f in FINE_CATALOG {
            let v = concretize(
                AbstractClass::Fine(f),
                ConcretizationMode::Deterministic,
                &mut rng,
            )
            .unwrap();
            assert_eq!(
                abstract_value(&v, Granularity::Coarse),
                AbstractClass::Coarse(coarsen(f))
            );
        }
    }

    #[test]
    fn concretization_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let v = concretize(
            AbstractClass::Fine(FineClass::StrNonempty),
            ConcretizationMode::Deterministic,
            &mut rng,
        )
        .unwrap();
        assert_eq!(v.to_display_string(), "a");
        let v = concretize(
            AbstractClass::Coarse(CoarseClass::Integer),
            ConcretizationMode::Deterministic,
            &mut rng,
        )
        .unwrap();
        assert!(matches!(v, Value::Int(1)));
        let v = concretize(
            AbstractClass::Coarse(CoarseClass::String),
            ConcretizationMode::Randomized,
            &mut rng,
        )
        .unwrap();
        let s = v.to_display_string();
        assert!(s.is_empty() || s == "a");
    }

    #[test]
    fn randomized_requires_coarse() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = concretize(
            AbstractClass::Fine(FineClass::IntPos),
            ConcretizationMode::Randomized,
            &mut rng,
        )
        .unwrap_err();
        assert_eq!(err, AbstractionError::RandomizedRequiresCoarse);
    }

    #[test]
    fn coarsen_merges() {
        assert_eq!(coarsen(FineClass::IntNeg), CoarseClass::Integer);
        assert_eq!(coarsen(FineClass::ListEmpty), CoarseClass::List);
        assert_eq!(coarsen(FineClass::Callable), CoarseClass::Callable);
    }

    #[test]
    fn labels_round_trip() {
        for c in catalog(Granularity::Fine) {
            assert_eq!(AbstractClass::from_label(Granularity::Fine, c.label()), Some(c));
        }
        for c in catalog(Granularity::Coarse) {
            assert_eq!(
                AbstractClass::from_label(Granularity::Coarse, c.label()),
                Some(c)
            );
        }
        assert_eq!(AbstractClass::from_label(Granularity::Fine, "boolean"), None);
    }
}

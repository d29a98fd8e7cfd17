//! Runtime values.
//!
//! Containers use shared interior mutability (`Rc<RefCell<...>>`) so that
//! aliasing behaves like the reference semantics users expect from a
//! dynamic language. Dicts and sets preserve insertion order.
//!
//! The `Dummy`, `DummyCallable` and `DummyResource` variants are the
//! engine-injected placeholder values: the variant itself is the
//! "injected by engine" marker, and every instance carries a unique id so
//! it stays hashable and identity-comparable.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use indexmap::IndexMap;

use crate::interp::{ExcKind, HostError};

static NEXT_DUMMY_ID: AtomicU64 = AtomicU64::new(1);

/// Placeholder object allocated by the runtime engine. Starts without any
/// members; attribute writes land in `attrs`.
#[derive(Debug)]
pub struct DummyObj {
    pub id: u64,
    pub attrs: RefCell<HashMap<String, Value>>,
}

impl DummyObj {
    pub fn fresh() -> Rc<DummyObj> {
        Rc::new(DummyObj {
            id: NEXT_DUMMY_ID.fetch_add(1, Ordering::Relaxed),
            attrs: RefCell::new(HashMap::new()),
        })
    }
}

/// A user-defined function: parameters, body and captured defining scope.
pub struct FunctionObj {
    pub name: String,
    pub params: Vec<crate::ast::Param>,
    pub body: Rc<Vec<crate::ast::Stmt>>,
    pub closure: crate::interp::Env,
    /// Default values, evaluated at definition time.
    pub defaults: Vec<Option<Value>>,
}

impl std::fmt::Debug for FunctionObj {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "<function {}>", self.name)
    }
}

/// A lambda: like a function but anonymous and expression-bodied.
pub struct LambdaObj {
    pub params: Vec<crate::ast::Param>,
    pub body: Rc<crate::ast::Expr>,
    pub closure: crate::interp::Env,
    pub defaults: Vec<Option<Value>>,
}

impl std::fmt::Debug for LambdaObj {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "<lambda>")
    }
}

pub type BuiltinImpl = dyn Fn(
    &mut crate::interp::Interp,
    Vec<Value>,
    Vec<(String, Value)>,
) -> Result<Value, HostError>;

/// A native function. Builtins accept arbitrary positional and keyword
/// arguments and validate them internally.
pub struct BuiltinObj {
    pub name: String,
    pub func: Box<BuiltinImpl>,
}

impl std::fmt::Debug for BuiltinObj {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "<builtin {}>", self.name)
    }
}

/// Exception instance: carries the kind it was constructed from plus a
/// message.
#[derive(Debug)]
pub struct ExceptionObj {
    pub kind: ExcKind,
    pub message: String,
}

#[derive(Debug, Clone)]
pub enum Value {
    None,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(Rc<String>),
    List(Rc<RefCell<Vec<Value>>>),
    Tuple(Rc<Vec<Value>>),
    /// Ordered set keyed by hashable projection; the stored value is the
    /// original element.
    Set(Rc<RefCell<IndexMap<HashKey, Value>>>),
    /// Ordered map from hashable key projection to (key, value).
    Dict(Rc<RefCell<IndexMap<HashKey, (Value, Value)>>>),
    Range(Rc<(i64, i64, i64)>),
    Function(Rc<FunctionObj>),
    Lambda(Rc<LambdaObj>),
    Builtin(Rc<BuiltinObj>),
    /// An exception class such as `ValueError`; calling it constructs an
    /// exception instance.
    ExcType(ExcKind),
    Exception(Rc<ExceptionObj>),
    Dummy(Rc<DummyObj>),
    DummyCallable(Rc<DummyObj>),
    DummyResource(Rc<DummyObj>),
}

/// Hashable projection of a value, used as set element / dict key.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum HashKey {
    None,
    Bool(bool),
    Int(i64),
    /// Bit pattern; NaN hashes to itself, 0.0 and -0.0 are normalized.
    FloatBits(u64),
    Str(String),
    Tuple(Vec<HashKey>),
    Dummy(u64),
    Callable(u64),
    Resource(u64),
    /// Identity-keyed fallbacks for hashable-by-identity values.
    FunctionPtr(usize),
    BuiltinPtr(usize),
    ExcTypeKey(ExcKind),
    ExceptionPtr(usize),
}

impl Value {
    pub fn str_value(s: impl Into<String>) -> Value {
        Value::Str(Rc::new(s.into()))
    }

    pub fn new_list(items: Vec<Value>) -> Value {
        Value::List(Rc::new(RefCell::new(items)))
    }

    pub fn new_tuple(items: Vec<Value>) -> Value {
        Value::Tuple(Rc::new(items))
    }

    pub fn empty_set() -> Value {
        Value::Set(Rc::new(RefCell::new(IndexMap::new())))
    }

    pub fn empty_dict() -> Value {
        Value::Dict(Rc::new(RefCell::new(IndexMap::new())))
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::None => "NoneType",
            Value::Bool(_) => "bool",
            Value::Int(_) => "int",
            Value::Float(_) => "float",
            Value::Str(_) => "str",
            Value::List(_) => "list",
            Value::Tuple(_) => "tuple",
            Value::Set(_) => "set",
            Value::Dict(_) => "dict",
            Value::Range(_) => "range",
            Value::Function(_) => "function",
            Value::Lambda(_) => "function",
            Value::Builtin(_) => "builtin_function_or_method",
            Value::ExcType(_) => "type",
            Value::Exception(_) => "Exception",
            Value::Dummy(_) => "Dummy",
            Value::DummyCallable(_) => "DummyCallable",
            Value::DummyResource(_) => "DummyResource",
        }
    }

    pub fn is_engine_injected_marker(&self) -> bool {
        matches!(
            self,
            Value::Dummy(_) | Value::DummyCallable(_) | Value::DummyResource(_)
        )
    }

    pub fn is_callable(&self) -> bool {
        matches!(
            self,
            Value::Function(_)
                | Value::Lambda(_)
                | Value::Builtin(_)
                | Value::ExcType(_)
                | Value::DummyCallable(_)
        )
    }

    pub fn truthy(&self) -> bool {
        match self {
            Value::None => false,
            Value::Bool(b) => *b,
            Value::Int(i) => *i != 0,
            Value::Float(f) => *f != 0.0,
            Value::Str(s) => !s.is_empty(),
            Value::List(l) => !l.borrow().is_empty(),
            Value::Tuple(t) => !t.is_empty(),
            Value::Set(s) => !s.borrow().is_empty(),
            Value::Dict(d) => !d.borrow().is_empty(),
            Value::Range(r) => range_len(r) > 0,
            _ => true,
        }
    }

    /// Identity comparison (the `is` operator). Heap values compare by
    /// pointer, immutable scalars by value.
    pub fn identical(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::None, Value::None) => true,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Float(a), Value::Float(b)) => a.to_bits() == b.to_bits(),
            (Value::Str(a), Value::Str(b)) => Rc::ptr_eq(a, b),
            (Value::List(a), Value::List(b)) => Rc::ptr_eq(a, b),
            (Value::Tuple(a), Value::Tuple(b)) => Rc::ptr_eq(a, b),
            (Value::Set(a), Value::Set(b)) => Rc::ptr_eq(a, b),
            (Value::Dict(a), Value::Dict(b)) => Rc::ptr_eq(a, b),
            (Value::Range(a), Value::Range(b)) => Rc::ptr_eq(a, b),
            (Value::Function(a), Value::Function(b)) => Rc::ptr_eq(a, b),
            (Value::Lambda(a), Value::Lambda(b)) => Rc::ptr_eq(a, b),
            (Value::Builtin(a), Value::Builtin(b)) => Rc::ptr_eq(a, b),
            (Value::ExcType(a), Value::ExcType(b)) => a == b,
            (Value::Exception(a), Value::Exception(b)) => Rc::ptr_eq(a, b),
            (Value::Dummy(a), Value::Dummy(b)) => a.id == b.id,
            (Value::DummyCallable(a), Value::DummyCallable(b)) => a.id == b.id,
            (Value::DummyResource(a), Value::DummyResource(b)) => a.id == b.id,
            _ => false,
        }
    }

    /// Structural equality (the `==` operator). Follows numeric-family
    /// cross-type equality; mixed non-numeric types are unequal, never an
    /// error.
    pub fn eq_value(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::None, Value::None) => true,
            (a, b) if is_numeric(a) && is_numeric(b) => {
                numeric_as_f64(a) == numeric_as_f64(b)
            }
            (Value::Str(a), Value::Str(b)) => a == b,
            (Value::List(a), Value::List(b)) => {
                if Rc::ptr_eq(a, b) {
                    return true;
                }
                let (a, b) = (a.borrow(), b.borrow());
                a.len() == b.len() && a.iter().zip(b.iter()).all(|(x, y)| x.eq_value(y))
            }
            (Value::Tuple(a), Value::Tuple(b)) => {
                a.len() == b.len() && a.iter().zip(b.iter()).all(|(x, y)| x.eq_value(y))
            }
            (Value::Set(a), Value::Set(b)) => {
                if Rc::ptr_eq(a, b) {
                    return true;
                }
                let (a, b) = (a.borrow(), b.borrow());
                a.len() == b.len() && a.keys().all(|k| b.contains_key(k))
            }
            (Value::Dict(a), Value::Dict(b)) => {
                if Rc::ptr_eq(a, b) {
                    return true;
                }
                let (a, b) = (a.borrow(), b.borrow());
                a.len() == b.len()
                    && a.iter().all(|(k, (_, v))| {
                        b.get(k).is_some_and(|(_, w)| v.eq_value(w))
                    })
            }
            (Value::Range(a), Value::Range(b)) => a == b,
            _ => self.identical(other),
        }
    }

    /// Hashable projection; errors for unhashable containers.
    pub fn hash_key(&self) -> Result<HashKey, HostError> {
        match self {
            Value::None => Ok(HashKey::None),
            Value::Bool(b) => Ok(HashKey::Bool(*b)),
            Value::Int(i) => Ok(HashKey::Int(*i)),
            Value::Float(f) => {
                // Integral floats hash like the corresponding int so that
                // `1 == 1.0` implies equal keys.
                if f.fract() == 0.0 && f.is_finite() && *f >= i64::MIN as f64 && *f <= i64::MAX as f64
                {
                    Ok(HashKey::Int(*f as i64))
                } else {
                    let bits = if *f == 0.0 { 0u64 } else { f.to_bits() };
                    Ok(HashKey::FloatBits(bits))
                }
            }
            Value::Str(s) => Ok(HashKey::Str(s.as_ref().clone())),
            Value::Tuple(items) => {
                let keys = items
                    .iter()
                    .map(|v| v.hash_key())
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(HashKey::Tuple(keys))
            }
            Value::Dummy(d) => Ok(HashKey::Dummy(d.id)),
            Value::DummyCallable(d) => Ok(HashKey::Callable(d.id)),
            Value::DummyResource(d) => Ok(HashKey::Resource(d.id)),
            Value::Function(f) => Ok(HashKey::FunctionPtr(Rc::as_ptr(f) as usize)),
            Value::Lambda(f) => Ok(HashKey::FunctionPtr(Rc::as_ptr(f) as usize)),
            Value::Builtin(f) => Ok(HashKey::BuiltinPtr(Rc::as_ptr(f) as usize)),
            Value::ExcType(k) => Ok(HashKey::ExcTypeKey(*k)),
            Value::Exception(e) => Ok(HashKey::ExceptionPtr(Rc::as_ptr(e) as usize)),
            Value::List(_) | Value::Set(_) | Value::Dict(_) | Value::Range(_) => {
                Err(HostError::new(
                    ExcKind::TypeError,
                    format!("unhashable type: '{}'", self.type_name()),
                ))
            }
        }
    }

    /// `str()` conversion: strings render bare, everything else as `repr`.
    pub fn to_display_string(&self) -> String {
        match self {
            Value::Str(s) => s.as_ref().clone(),
            Value::Exception(e) => e.message.clone(),
            other => other.to_repr_string(),
        }
    }

    pub fn to_repr_string(&self) -> String {
        match self {
            Value::None => "None".to_string(),
            Value::Bool(true) => "True".to_string(),
            Value::Bool(false) => "False".to_string(),
            Value::Int(i) => i.to_string(),
            Value::Float(f) => format_float(*f),
            Value::Str(s) => repr_str(s),
            Value::List(items) => {
                let items = items.borrow();
                let mut out = String::from("[");
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    out.push_str(&v.to_repr_string());
                }
                out.push(']');
                out
            }
            Value::Tuple(items) => {
                let mut out = String::from("(");
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    out.push_str(&v.to_repr_string());
                }
                if items.len() == 1 {
                    out.push(',');
                }
                out.push(')');
                out
            }
            Value::Set(items) => {
                let items = items.borrow();
                if items.is_empty() {
                    return "set()".to_string();
                }
                let mut out = String::from("{");
                for (i, (_, v)) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    out.push_str(&v.to_repr_string());
                }
                out.push('}');
                out
            }
            Value::Dict(items) => {
                let items = items.borrow();
                let mut out = String::from("{");
                for (i, (_, (k, v))) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    let _ = write!(out, "{}: {}", k.to_repr_string(), v.to_repr_string());
                }
                out.push('}');
                out
            }
            Value::Range(r) => {
                if r.2 == 1 {
                    format!("range({}, {})", r.0, r.1)
                } else {
                    format!("range({}, {}, {})", r.0, r.1, r.2)
                }
            }
            Value::Function(f) => format!("<function {}>", f.name),
            Value::Lambda(_) => "<lambda>".to_string(),
            Value::Builtin(b) => format!("<builtin {}>", b.name),
            Value::ExcType(k) => format!("<class '{}'>", k.name()),
            Value::Exception(e) => format!("{}({})", e.kind.name(), repr_str(&e.message)),
            Value::Dummy(_) => "<Dummy>".to_string(),
            Value::DummyCallable(_) => "<DummyCallable>".to_string(),
            Value::DummyResource(_) => "<DummyResource>".to_string(),
        }
    }
}

pub fn is_numeric(v: &Value) -> bool {
    matches!(v, Value::Bool(_) | Value::Int(_) | Value::Float(_))
}

pub fn numeric_as_f64(v: &Value) -> f64 {
    match v {
        Value::Bool(b) => {
            if *b {
                1.0
            } else {
                0.0
            }
        }
        Value::Int(i) => *i as f64,
        Value::Float(f) => *f,
        _ => f64::NAN,
    }
}

pub fn range_len(r: &(i64, i64, i64)) -> i64 {
    let (start, stop, step) = *r;
    if step > 0 {
        ((stop - start).max(0) + step - 1) / step
    } else if step < 0 {
        ((start - stop).max(0) + (-step) - 1) / (-step)
    } else {
        0
    }
}

fn format_float(f: f64) -> String {
    if f.is_nan() {
        "nan".to_string()
    } else if f.is_infinite() {
        if f > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        }
    } else if f == f.trunc() && f.abs() < 1e16 {
        format!("{:.1}", f)
    } else {
        format!("{}", f)
    }
}

fn repr_str(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('\'');
    for c in s.chars() {
        match c {
            '\'' => out.push_str("\\'"),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            other => out.push(other),
        }
    }
    out.push('\'');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reprs() {
        assert_eq!(Value::Int(3).to_repr_string(), "3");
        assert_eq!(Value::Float(1.0).to_repr_string(), "1.0");
        assert_eq!(Value::Float(0.5).to_repr_string(), "0.5");
        assert_eq!(Value::str_value("a'b").to_repr_string(), "'a\\'b'");
        assert_eq!(
            Value::new_tuple(vec![Value::Int(1)]).to_repr_string(),
            "(1,)"
        );
        assert_eq!(Value::empty_set().to_repr_string(), "set()");
    }

    #[test]
    fn dummy_identity_and_hash() {
        let a = Value::Dummy(DummyObj::fresh());
        let b = Value::Dummy(DummyObj::fresh());
        assert!(a.identical(&a));
        assert!(!a.identical(&b));
        assert_ne!(a.hash_key().unwrap(), b.hash_key().unwrap());
    }

    #[test]
    fn numeric_equality_crosses_types() {
        assert!(Value::Int(1).eq_value(&Value::Float(1.0)));
        assert!(Value::Bool(true).eq_value(&Value::Int(1)));
        assert!(!Value::Int(1).eq_value(&Value::str_value("1")));
    }

    #[test]
    fn lists_are_unhashable() {
        assert!(Value::new_list(vec![]).hash_key().is_err());
    }
}

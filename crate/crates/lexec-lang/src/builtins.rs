//! Native functions, operators, and the attribute/method table.

use std::cmp::Ordering;
use std::rc::Rc;

use crate::ast::{BinOpKind, CmpOpKind, UnaryOpKind};
use crate::interp::{order_values, Env, ExcKind, HostError, Interp, LoaderSet, VResult, ValueIter};
use crate::value::{is_numeric, numeric_as_f64, range_len, BuiltinObj, Value};

pub fn make_builtin(
    name: impl Into<String>,
    f: impl Fn(&mut Interp, Vec<Value>, Vec<(String, Value)>) -> VResult + 'static,
) -> Value {
    Value::Builtin(Rc::new(BuiltinObj {
        name: name.into(),
        func: Box::new(f),
    }))
}

fn type_error(msg: impl Into<String>) -> HostError {
    HostError::new(ExcKind::TypeError, msg)
}

fn value_error(msg: impl Into<String>) -> HostError {
    HostError::new(ExcKind::ValueError, msg)
}

fn expect_arity(name: &str, args: &[Value], min: usize, max: usize) -> Result<(), HostError> {
    if args.len() < min || args.len() > max {
        return Err(type_error(format!(
            "{name}() takes {min} to {max} arguments but {} were given",
            args.len()
        )));
    }
    Ok(())
}

fn reject_kwargs(name: &str, kwargs: &[(String, Value)]) -> Result<(), HostError> {
    if let Some((k, _)) = kwargs.first() {
        return Err(type_error(format!(
            "{name}() got an unexpected keyword argument '{k}'"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Pass-through loaders

/// Loader set that performs the underlying operation with no interception.
/// Instrumented code run without an engine session behaves exactly like the
/// original code.
pub fn passthrough_loaders() -> LoaderSet {
    let name_loader = make_builtin(crate::NAME_LOADER_FN, |interp, args, _kw| {
        let accessor = args
            .get(2)
            .ok_or_else(|| type_error("name loader expects (iid, name, accessor)"))?
            .clone();
        interp.call_value(&accessor, Vec::new(), Vec::new())
    });
    let attr_loader = make_builtin(crate::ATTR_LOADER_FN, |_interp, args, _kw| {
        let base = args
            .get(1)
            .ok_or_else(|| type_error("attribute loader expects (iid, base, attr)"))?;
        let attr = match args.get(2) {
            Some(Value::Str(s)) => s.as_ref().clone(),
            _ => return Err(type_error("attribute loader expects a string attribute name")),
        };
        get_attr(base, &attr)
    });
    let call_loader = make_builtin(crate::CALL_LOADER_FN, |interp, mut args, kwargs| {
        if args.len() < 2 {
            return Err(type_error("call loader expects (iid, callee, ...args)"));
        }
        let rest = args.split_off(2);
        let callee = args.pop().unwrap();
        interp.call_value(&callee, rest, kwargs)
    });
    LoaderSet {
        name_loader,
        attr_loader,
        call_loader,
    }
}

// ---------------------------------------------------------------------------
// Global builtins

pub fn install(env: &Env) {
    env.set(
        "print",
        make_builtin("print", |interp, args, kwargs| {
            let mut sep = " ".to_string();
            let mut end = "\n".to_string();
            for (k, v) in &kwargs {
                match (k.as_str(), v) {
                    ("sep", Value::Str(s)) => sep = s.as_ref().clone(),
                    ("end", Value::Str(s)) => end = s.as_ref().clone(),
                    ("sep", Value::None) | ("end", Value::None) => {}
                    ("sep", other) | ("end", other) => {
                        return Err(type_error(format!(
                            "{k} must be None or a string, not {}",
                            other.type_name()
                        )))
                    }
                    (other, _) => {
                        return Err(type_error(format!(
                            "'{other}' is an invalid keyword argument for print()"
                        )))
                    }
                }
            }
            let text = args
                .iter()
                .map(|v| v.to_display_string())
                .collect::<Vec<_>>()
                .join(&sep);
            let mut out = interp.out.borrow_mut();
            out.extend_from_slice(text.as_bytes());
            out.extend_from_slice(end.as_bytes());
            Ok(Value::None)
        }),
    );

    env.set(
        "len",
        make_builtin("len", |_it, args, kw| {
            reject_kwargs("len", &kw)?;
            expect_arity("len", &args, 1, 1)?;
            let n = match &args[0] {
                Value::Str(s) => s.chars().count() as i64,
                Value::List(l) => l.borrow().len() as i64,
                Value::Tuple(t) => t.len() as i64,
                Value::Set(s) => s.borrow().len() as i64,
                Value::Dict(d) => d.borrow().len() as i64,
                Value::Range(r) => range_len(r),
                other => {
                    return Err(type_error(format!(
                        "object of type '{}' has no len()",
                        other.type_name()
                    )))
                }
            };
            Ok(Value::Int(n))
        }),
    );

    env.set(
        "str",
        make_builtin("str", |_it, args, kw| {
            reject_kwargs("str", &kw)?;
            expect_arity("str", &args, 0, 1)?;
            Ok(Value::str_value(match args.first() {
                Some(v) => v.to_display_string(),
                None => String::new(),
            }))
        }),
    );

    env.set(
        "repr",
        make_builtin("repr", |_it, args, kw| {
            reject_kwargs("repr", &kw)?;
            expect_arity("repr", &args, 1, 1)?;
            Ok(Value::str_value(args[0].to_repr_string()))
        }),
    );

    env.set(
        "bool",
        make_builtin("bool", |_it, args, kw| {
            reject_kwargs("bool", &kw)?;
            expect_arity("bool", &args, 0, 1)?;
            Ok(Value::Bool(args.first().is_some_and(|v| v.truthy())))
        }),
    );

    env.set(
        "int",
        make_builtin("int", |_it, args, kw| {
            reject_kwargs("int", &kw)?;
            expect_arity("int", &args, 0, 1)?;
            match args.first() {
                None => Ok(Value::Int(0)),
                Some(Value::Int(i)) => Ok(Value::Int(*i)),
                Some(Value::Bool(b)) => Ok(Value::Int(*b as i64)),
                Some(Value::Float(f)) => Ok(Value::Int(f.trunc() as i64)),
                Some(Value::Str(s)) => s.trim().parse::<i64>().map(Value::Int).map_err(|_| {
                    value_error(format!(
                        "invalid literal for int() with base 10: '{}'",
                        s.as_ref()
                    ))
                }),
                Some(other) => Err(type_error(format!(
                    "int() argument must be a string or a number, not '{}'",
                    other.type_name()
                ))),
            }
        }),
    );

    env.set(
        "float",
        make_builtin("float", |_it, args, kw| {
            reject_kwargs("float", &kw)?;
            expect_arity("float", &args, 0, 1)?;
            match args.first() {
                None => Ok(Value::Float(0.0)),
                Some(v) if is_numeric(v) => Ok(Value::Float(numeric_as_f64(v))),
                Some(Value::Str(s)) => s.trim().parse::<f64>().map(Value::Float).map_err(|_| {
                    value_error(format!("could not convert string to float: '{}'", s.as_ref()))
                }),
                Some(other) => Err(type_error(format!(
                    "float() argument must be a string or a number, not '{}'",
                    other.type_name()
                ))),
            }
        }),
    );

    env.set(
        "abs",
        make_builtin("abs", |_it, args, kw| {
            reject_kwargs("abs", &kw)?;
            expect_arity("abs", &args, 1, 1)?;
            match &args[0] {
                Value::Int(i) => Ok(Value::Int(i.wrapping_abs())),
                Value::Bool(b) => Ok(Value::Int(*b as i64)),
                Value::Float(f) => Ok(Value::Float(f.abs())),
                other => Err(type_error(format!(
                    "bad operand type for abs(): '{}'",
                    other.type_name()
                ))),
            }
        }),
    );

    env.set(
        "list",
        make_builtin("list", |it, args, kw| {
            reject_kwargs("list", &kw)?;
            expect_arity("list", &args, 0, 1)?;
            match args.first() {
                None => Ok(Value::new_list(Vec::new())),
                Some(v) => Ok(Value::new_list(collect_iter(it, v)?)),
            }
        }),
    );

    env.set(
        "tuple",
        make_builtin("tuple", |it, args, kw| {
            reject_kwargs("tuple", &kw)?;
            expect_arity("tuple", &args, 0, 1)?;
            match args.first() {
                None => Ok(Value::new_tuple(Vec::new())),
                Some(v) => Ok(Value::new_tuple(collect_iter(it, v)?)),
            }
        }),
    );

    env.set(
        "set",
        make_builtin("set", |it, args, kw| {
            reject_kwargs("set", &kw)?;
            expect_arity("set", &args, 0, 1)?;
            let out = Value::empty_set();
            if let Some(v) = args.first() {
                for item in collect_iter(it, v)? {
                    let k = item.hash_key()?;
                    if let Value::Set(s) = &out {
                        s.borrow_mut().insert(k, item);
                    }
                }
            }
            Ok(out)
        }),
    );

    env.set(
        "dict",
        make_builtin("dict", |_it, args, kw| {
            reject_kwargs("dict", &kw)?;
            expect_arity("dict", &args, 0, 1)?;
            match args.first() {
                None => Ok(Value::empty_dict()),
                Some(Value::Dict(d)) => {
                    let out = Value::empty_dict();
                    if let Value::Dict(o) = &out {
                        *o.borrow_mut() = d.borrow().clone();
                    }
                    Ok(out)
                }
                Some(other) => Err(type_error(format!(
                    "dict() argument must be a dict, not '{}'",
                    other.type_name()
                ))),
            }
        }),
    );

    env.set(
        "range",
        make_builtin("range", |_it, args, kw| {
            reject_kwargs("range", &kw)?;
            expect_arity("range", &args, 1, 3)?;
            let ints = args
                .iter()
                .map(as_index)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| type_error("range() arguments must be integers"))?;
            let (start, stop, step) = match ints.len() {
                1 => (0, ints[0], 1),
                2 => (ints[0], ints[1], 1),
                _ => (ints[0], ints[1], ints[2]),
            };
            if step == 0 {
                return Err(value_error("range() arg 3 must not be zero"));
            }
            Ok(Value::Range(Rc::new((start, stop, step))))
        }),
    );

    env.set(
        "sum",
        make_builtin("sum", |it, args, kw| {
            reject_kwargs("sum", &kw)?;
            expect_arity("sum", &args, 1, 2)?;
            let mut acc = match args.get(1) {
                Some(v) if is_numeric(v) => v.clone(),
                Some(other) => {
                    return Err(type_error(format!(
                        "sum() start must be a number, not '{}'",
                        other.type_name()
                    )))
                }
                None => Value::Int(0),
            };
            let iter = ValueIter::new(&args[0])?;
            for (i, item) in iter.enumerate() {
                if i & 0xFFF == 0 {
                    it.tick()?;
                }
                acc = binary_op(BinOpKind::Add, &acc, &item)?;
            }
            Ok(acc)
        }),
    );

    env.set("min", make_builtin("min", min_max_impl(true)));
    env.set("max", make_builtin("max", min_max_impl(false)));

    env.set(
        "sorted",
        make_builtin("sorted", |it, args, kw| {
            expect_arity("sorted", &args, 1, 1)?;
            let mut key_fn: Option<Value> = None;
            let mut reverse = false;
            for (k, v) in kw {
                match k.as_str() {
                    "key" => {
                        if !matches!(v, Value::None) {
                            key_fn = Some(v)
                        }
                    }
                    "reverse" => reverse = v.truthy(),
                    other => {
                        return Err(type_error(format!(
                            "'{other}' is an invalid keyword argument for sorted()"
                        )))
                    }
                }
            }
            let items = collect_iter(it, &args[0])?;
            let keys: Vec<Value> = match &key_fn {
                None => items.clone(),
                Some(f) => {
                    let mut ks = Vec::with_capacity(items.len());
                    for item in &items {
                        ks.push(it.call_value(f, vec![item.clone()], Vec::new())?);
                    }
                    ks
                }
            };
            let mut order: Vec<usize> = (0..items.len()).collect();
            let mut failure: Option<HostError> = None;
            order.sort_by(|&a, &b| match order_values(&keys[a], &keys[b]) {
                Ok(o) => {
                    if reverse {
                        o.reverse()
                    } else {
                        o
                    }
                }
                Err(e) => {
                    if failure.is_none() {
                        failure = Some(e);
                    }
                    Ordering::Equal
                }
            });
            if let Some(e) = failure {
                return Err(e);
            }
            Ok(Value::new_list(
                order.into_iter().map(|i| items[i].clone()).collect(),
            ))
        }),
    );

    env.set(
        "type",
        make_builtin("type", |_it, args, kw| {
            reject_kwargs("type", &kw)?;
            expect_arity("type", &args, 1, 1)?;
            Ok(Value::str_value(args[0].type_name()))
        }),
    );

    env.set(
        "map",
        make_builtin("map", |it, args, kw| {
            reject_kwargs("map", &kw)?;
            expect_arity("map", &args, 2, 2)?;
            let f = args[0].clone();
            let items = collect_iter(it, &args[1])?;
            let mut out = Vec::with_capacity(items.len());
            for item in items {
                out.push(it.call_value(&f, vec![item], Vec::new())?);
            }
            Ok(Value::new_list(out))
        }),
    );

    env.set(
        "filter",
        make_builtin("filter", |it, args, kw| {
            reject_kwargs("filter", &kw)?;
            expect_arity("filter", &args, 2, 2)?;
            let f = args[0].clone();
            let items = collect_iter(it, &args[1])?;
            let mut out = Vec::new();
            for item in items {
                let keep = match &f {
                    Value::None => item.truthy(),
                    other => it.call_value(other, vec![item.clone()], Vec::new())?.truthy(),
                };
                if keep {
                    out.push(item);
                }
            }
            Ok(Value::new_list(out))
        }),
    );

    env.set(
        "enumerate",
        make_builtin("enumerate", |it, args, kw| {
            reject_kwargs("enumerate", &kw)?;
            expect_arity("enumerate", &args, 1, 2)?;
            let start = match args.get(1) {
                Some(v) => as_index(v)?,
                None => 0,
            };
            let items = collect_iter(it, &args[0])?;
            Ok(Value::new_list(
                items
                    .into_iter()
                    .enumerate()
                    .map(|(i, v)| Value::new_tuple(vec![Value::Int(start + i as i64), v]))
                    .collect(),
            ))
        }),
    );

    env.set(
        "zip",
        make_builtin("zip", |it, args, kw| {
            reject_kwargs("zip", &kw)?;
            let columns = args
                .iter()
                .map(|v| collect_iter(it, v))
                .collect::<Result<Vec<_>, _>>()?;
            let n = columns.iter().map(|c| c.len()).min().unwrap_or(0);
            let mut rows = Vec::with_capacity(n);
            for i in 0..n {
                rows.push(Value::new_tuple(
                    columns.iter().map(|c| c[i].clone()).collect(),
                ));
            }
            Ok(Value::new_list(rows))
        }),
    );

    for kind in ExcKind::all() {
        env.set(kind.name(), Value::ExcType(*kind));
    }
}

fn min_max_impl(
    is_min: bool,
) -> impl Fn(&mut Interp, Vec<Value>, Vec<(String, Value)>) -> VResult {
    move |it, args, kw| {
        let name = if is_min { "min" } else { "max" };
        reject_kwargs(name, &kw)?;
        if args.is_empty() {
            return Err(type_error(format!("{name} expected at least 1 argument")));
        }
        let items = if args.len() == 1 {
            collect_iter(it, &args[0])?
        } else {
            args
        };
        if items.is_empty() {
            return Err(value_error(format!("{name}() arg is an empty sequence")));
        }
        let mut best = items[0].clone();
        for item in &items[1..] {
            let ord = order_values(item, &best)?;
            let better = if is_min {
                ord == Ordering::Less
            } else {
                ord == Ordering::Greater
            };
            if better {
                best = item.clone();
            }
        }
        Ok(best)
    }
}

fn collect_iter(interp: &mut Interp, v: &Value) -> Result<Vec<Value>, HostError> {
    let iter = ValueIter::new(v)?;
    let mut out = Vec::new();
    for (i, item) in iter.enumerate() {
        if i & 0xFFF == 0 {
            interp.tick()?;
        }
        out.push(item);
    }
    Ok(out)
}

fn as_index(v: &Value) -> Result<i64, HostError> {
    match v {
        Value::Int(i) => Ok(*i),
        Value::Bool(b) => Ok(*b as i64),
        other => Err(type_error(format!(
            "'{}' object cannot be interpreted as an integer",
            other.type_name()
        ))),
    }
}

// ---------------------------------------------------------------------------
// Attribute access

pub fn get_attr(value: &Value, name: &str) -> VResult {
    match value {
        Value::Dummy(d) | Value::DummyCallable(d) | Value::DummyResource(d) => {
            if let Some(v) = d.attrs.borrow().get(name) {
                return Ok(v.clone());
            }
            Err(HostError::new(
                ExcKind::AttributeError,
                format!("'{}' object has no attribute '{}'", value.type_name(), name),
            ))
        }
        _ => match method_table(value, name) {
            Some(m) => Ok(m),
            None => Err(HostError::new(
                ExcKind::AttributeError,
                format!("'{}' object has no attribute '{}'", value.type_name(), name),
            )),
        },
    }
}

pub fn set_attr(base: &Value, name: &str, value: Value) -> Result<(), HostError> {
    match base {
        Value::Dummy(d) | Value::DummyCallable(d) | Value::DummyResource(d) => {
            d.attrs.borrow_mut().insert(name.to_string(), value);
            Ok(())
        }
        other => Err(HostError::new(
            ExcKind::AttributeError,
            format!(
                "cannot set attribute '{}' on '{}' object",
                name,
                other.type_name()
            ),
        )),
    }
}

fn bound(
    name: &str,
    recv: Value,
    f: impl Fn(&mut Interp, &Value, Vec<Value>, Vec<(String, Value)>) -> VResult + 'static,
) -> Value {
    let label = name.to_string();
    make_builtin(name, move |it, args, kw| {
        let _ = &label;
        f(it, &recv, args, kw)
    })
}

fn method_table(value: &Value, name: &str) -> Option<Value> {
    match value {
        Value::Str(_) => str_method(value.clone(), name),
        Value::List(_) => list_method(value.clone(), name),
        Value::Dict(_) => dict_method(value.clone(), name),
        Value::Set(_) => set_method(value.clone(), name),
        Value::Tuple(_) => tuple_method(value.clone(), name),
        _ => None,
    }
}

fn recv_str(v: &Value) -> Rc<String> {
    match v {
        Value::Str(s) => s.clone(),
        _ => unreachable!(),
    }
}

fn str_method(recv: Value, name: &str) -> Option<Value> {
    let m = match name {
        "upper" => bound("str.upper", recv, |_it, r, args, kw| {
            reject_kwargs("upper", &kw)?;
            expect_arity("upper", &args, 0, 0)?;
            Ok(Value::str_value(recv_str(r).to_uppercase()))
        }),
        "lower" => bound("str.lower", recv, |_it, r, args, kw| {
            reject_kwargs("lower", &kw)?;
            expect_arity("lower", &args, 0, 0)?;
            Ok(Value::str_value(recv_str(r).to_lowercase()))
        }),
        "strip" => bound("str.strip", recv, |_it, r, args, kw| {
            reject_kwargs("strip", &kw)?;
            expect_arity("strip", &args, 0, 0)?;
            Ok(Value::str_value(recv_str(r).trim().to_string()))
        }),
        "split" => bound("str.split", recv, |_it, r, args, kw| {
            reject_kwargs("split", &kw)?;
            expect_arity("split", &args, 0, 1)?;
            let s = recv_str(r);
            let parts: Vec<Value> = match args.first() {
                None | Some(Value::None) => s
                    .split_whitespace()
                    .map(|p| Value::str_value(p.to_string()))
                    .collect(),
                Some(Value::Str(sep)) => {
                    if sep.is_empty() {
                        return Err(value_error("empty separator"));
                    }
                    s.split(sep.as_str())
                        .map(|p| Value::str_value(p.to_string()))
                        .collect()
                }
                Some(other) => {
                    return Err(type_error(format!(
                        "must be str or None, not {}",
                        other.type_name()
                    )))
                }
            };
            Ok(Value::new_list(parts))
        }),
        "join" => bound("str.join", recv, |it, r, args, kw| {
            reject_kwargs("join", &kw)?;
            expect_arity("join", &args, 1, 1)?;
            let sep = recv_str(r);
            let items = collect_iter(it, &args[0])?;
            let mut parts = Vec::with_capacity(items.len());
            for item in items {
                match item {
                    Value::Str(s) => parts.push(s.as_ref().clone()),
                    other => {
                        return Err(type_error(format!(
                            "sequence item: expected str instance, {} found",
                            other.type_name()
                        )))
                    }
                }
            }
            Ok(Value::str_value(parts.join(sep.as_str())))
        }),
        "replace" => bound("str.replace", recv, |_it, r, args, kw| {
            reject_kwargs("replace", &kw)?;
            expect_arity("replace", &args, 2, 2)?;
            match (&args[0], &args[1]) {
                (Value::Str(a), Value::Str(b)) => Ok(Value::str_value(
                    recv_str(r).replace(a.as_str(), b.as_str()),
                )),
                _ => Err(type_error("replace arguments must be str")),
            }
        }),
        "startswith" => bound("str.startswith", recv, |_it, r, args, kw| {
            reject_kwargs("startswith", &kw)?;
            expect_arity("startswith", &args, 1, 1)?;
            match &args[0] {
                Value::Str(p) => Ok(Value::Bool(recv_str(r).starts_with(p.as_str()))),
                other => Err(type_error(format!(
                    "startswith first arg must be str, not {}",
                    other.type_name()
                ))),
            }
        }),
        "endswith" => bound("str.endswith", recv, |_it, r, args, kw| {
            reject_kwargs("endswith", &kw)?;
            expect_arity("endswith", &args, 1, 1)?;
            match &args[0] {
                Value::Str(p) => Ok(Value::Bool(recv_str(r).ends_with(p.as_str()))),
                other => Err(type_error(format!(
                    "endswith first arg must be str, not {}",
                    other.type_name()
                ))),
            }
        }),
        "find" => bound("str.find", recv, |_it, r, args, kw| {
            reject_kwargs("find", &kw)?;
            expect_arity("find", &args, 1, 1)?;
            match &args[0] {
                Value::Str(p) => {
                    let s = recv_str(r);
                    match s.find(p.as_str()) {
                        Some(byte_idx) => {
                            let char_idx = s[..byte_idx].chars().count() as i64;
                            Ok(Value::Int(char_idx))
                        }
                        None => Ok(Value::Int(-1)),
                    }
                }
                other => Err(type_error(format!(
                    "must be str, not {}",
                    other.type_name()
                ))),
            }
        }),
        _ => return None,
    };
    Some(m)
}

fn list_method(recv: Value, name: &str) -> Option<Value> {
    fn with_list<T>(v: &Value, f: impl FnOnce(&mut Vec<Value>) -> T) -> T {
        match v {
            Value::List(l) => f(&mut l.borrow_mut()),
            _ => unreachable!(),
        }
    }
    let m = match name {
        "append" => bound("list.append", recv, |_it, r, args, kw| {
            reject_kwargs("append", &kw)?;
            expect_arity("append", &args, 1, 1)?;
            with_list(r, |l| l.push(args[0].clone()));
            Ok(Value::None)
        }),
        "extend" => bound("list.extend", recv, |it, r, args, kw| {
            reject_kwargs("extend", &kw)?;
            expect_arity("extend", &args, 1, 1)?;
            let items = collect_iter(it, &args[0])?;
            with_list(r, |l| l.extend(items));
            Ok(Value::None)
        }),
        "pop" => bound("list.pop", recv, |_it, r, args, kw| {
            reject_kwargs("pop", &kw)?;
            expect_arity("pop", &args, 0, 1)?;
            let idx = match args.first() {
                Some(v) => Some(as_index(v)?),
                None => None,
            };
            with_list(r, |l| {
                if l.is_empty() {
                    return Err(HostError::new(
                        ExcKind::IndexError,
                        "pop from empty list",
                    ));
                }
                let i = match idx {
                    None => l.len() - 1,
                    Some(i) => {
                        let i = if i < 0 { i + l.len() as i64 } else { i };
                        if i < 0 || i as usize >= l.len() {
                            return Err(HostError::new(
                                ExcKind::IndexError,
                                "pop index out of range",
                            ));
                        }
                        i as usize
                    }
                };
                Ok(l.remove(i))
            })
        }),
        "remove" => bound("list.remove", recv, |_it, r, args, kw| {
            reject_kwargs("remove", &kw)?;
            expect_arity("remove", &args, 1, 1)?;
            with_list(r, |l| {
                match l.iter().position(|v| v.eq_value(&args[0])) {
                    Some(i) => {
                        l.remove(i);
                        Ok(Value::None)
                    }
                    None => Err(value_error("list.remove(x): x not in list")),
                }
            })
        }),
        "insert" => bound("list.insert", recv, |_it, r, args, kw| {
            reject_kwargs("insert", &kw)?;
            expect_arity("insert", &args, 2, 2)?;
            let i = as_index(&args[0])?;
            with_list(r, |l| {
                let pos = if i < 0 {
                    (i + l.len() as i64).max(0) as usize
                } else {
                    (i as usize).min(l.len())
                };
                l.insert(pos, args[1].clone());
            });
            Ok(Value::None)
        }),
        "index" => bound("list.index", recv, |_it, r, args, kw| {
            reject_kwargs("index", &kw)?;
            expect_arity("index", &args, 1, 1)?;
            with_list(r, |l| match l.iter().position(|v| v.eq_value(&args[0])) {
                Some(i) => Ok(Value::Int(i as i64)),
                None => Err(value_error(format!(
                    "{} is not in list",
                    args[0].to_repr_string()
                ))),
            })
        }),
        "count" => bound("list.count", recv, |_it, r, args, kw| {
            reject_kwargs("count", &kw)?;
            expect_arity("count", &args, 1, 1)?;
            let n = with_list(r, |l| l.iter().filter(|v| v.eq_value(&args[0])).count());
            Ok(Value::Int(n as i64))
        }),
        "reverse" => bound("list.reverse", recv, |_it, r, args, kw| {
            reject_kwargs("reverse", &kw)?;
            expect_arity("reverse", &args, 0, 0)?;
            with_list(r, |l| l.reverse());
            Ok(Value::None)
        }),
        "clear" => bound("list.clear", recv, |_it, r, args, kw| {
            reject_kwargs("clear", &kw)?;
            expect_arity("clear", &args, 0, 0)?;
            with_list(r, |l| l.clear());
            Ok(Value::None)
        }),
        "copy" => bound("list.copy", recv, |_it, r, args, kw| {
            reject_kwargs("copy", &kw)?;
            expect_arity("copy", &args, 0, 0)?;
            Ok(Value::new_list(with_list(r, |l| l.clone())))
        }),
        "sort" => bound("list.sort", recv, |_it, r, args, kw| {
            reject_kwargs("sort", &kw)?;
            expect_arity("sort", &args, 0, 0)?;
            let items = with_list(r, |l| l.clone());
            let mut order: Vec<usize> = (0..items.len()).collect();
            let mut failure: Option<HostError> = None;
            order.sort_by(|&a, &b| match order_values(&items[a], &items[b]) {
                Ok(o) => o,
                Err(e) => {
                    if failure.is_none() {
                        failure = Some(e);
                    }
                    Ordering::Equal
                }
            });
            if let Some(e) = failure {
                return Err(e);
            }
            let sorted: Vec<Value> = order.into_iter().map(|i| items[i].clone()).collect();
            with_list(r, |l| *l = sorted);
            Ok(Value::None)
        }),
        _ => return None,
    };
    Some(m)
}

fn dict_method(recv: Value, name: &str) -> Option<Value> {
    fn with_dict<T>(
        v: &Value,
        f: impl FnOnce(&mut indexmap::IndexMap<crate::value::HashKey, (Value, Value)>) -> T,
    ) -> T {
        match v {
            Value::Dict(d) => f(&mut d.borrow_mut()),
            _ => unreachable!(),
        }
    }
    let m = match name {
        "get" => bound("dict.get", recv, |_it, r, args, kw| {
            reject_kwargs("get", &kw)?;
            expect_arity("get", &args, 1, 2)?;
            let k = args[0].hash_key()?;
            let default = args.get(1).cloned().unwrap_or(Value::None);
            Ok(with_dict(r, |d| {
                d.get(&k).map(|(_, v)| v.clone()).unwrap_or(default)
            }))
        }),
        "keys" => bound("dict.keys", recv, |_it, r, args, kw| {
            reject_kwargs("keys", &kw)?;
            expect_arity("keys", &args, 0, 0)?;
            Ok(Value::new_list(with_dict(r, |d| {
                d.values().map(|(k, _)| k.clone()).collect()
            })))
        }),
        "values" => bound("dict.values", recv, |_it, r, args, kw| {
            reject_kwargs("values", &kw)?;
            expect_arity("values", &args, 0, 0)?;
            Ok(Value::new_list(with_dict(r, |d| {
                d.values().map(|(_, v)| v.clone()).collect()
            })))
        }),
        "items" => bound("dict.items", recv, |_it, r, args, kw| {
            reject_kwargs("items", &kw)?;
            expect_arity("items", &args, 0, 0)?;
            Ok(Value::new_list(with_dict(r, |d| {
                d.values()
                    .map(|(k, v)| Value::new_tuple(vec![k.clone(), v.clone()]))
                    .collect()
            })))
        }),
        "pop" => bound("dict.pop", recv, |_it, r, args, kw| {
            reject_kwargs("pop", &kw)?;
            expect_arity("pop", &args, 1, 2)?;
            let k = args[0].hash_key()?;
            with_dict(r, |d| match d.shift_remove(&k) {
                Some((_, v)) => Ok(v),
                None => match args.get(1) {
                    Some(d) => Ok(d.clone()),
                    None => Err(HostError::new(
                        ExcKind::KeyError,
                        args[0].to_repr_string(),
                    )),
                },
            })
        }),
        "update" => bound("dict.update", recv, |_it, r, args, kw| {
            reject_kwargs("update", &kw)?;
            expect_arity("update", &args, 1, 1)?;
            match &args[0] {
                Value::Dict(other) => {
                    let entries: Vec<_> = other
                        .borrow()
                        .iter()
                        .map(|(k, v)| (k.clone(), v.clone()))
                        .collect();
                    with_dict(r, |d| {
                        for (k, v) in entries {
                            d.insert(k, v);
                        }
                    });
                    Ok(Value::None)
                }
                other => Err(type_error(format!(
                    "update argument must be a dict, not '{}'",
                    other.type_name()
                ))),
            }
        }),
        "setdefault" => bound("dict.setdefault", recv, |_it, r, args, kw| {
            reject_kwargs("setdefault", &kw)?;
            expect_arity("setdefault", &args, 1, 2)?;
            let k = args[0].hash_key()?;
            let default = args.get(1).cloned().unwrap_or(Value::None);
            Ok(with_dict(r, |d| match d.get(&k) {
                Some((_, v)) => v.clone(),
                None => {
                    d.insert(k, (args[0].clone(), default.clone()));
                    default
                }
            }))
        }),
        "clear" => bound("dict.clear", recv, |_it, r, args, kw| {
            reject_kwargs("clear", &kw)?;
            expect_arity("clear", &args, 0, 0)?;
            with_dict(r, |d| d.clear());
            Ok(Value::None)
        }),
        "copy" => bound("dict.copy", recv, |_it, r, args, kw| {
            reject_kwargs("copy", &kw)?;
            expect_arity("copy", &args, 0, 0)?;
            let out = Value::empty_dict();
            let entries = with_dict(r, |d| d.clone());
            if let Value::Dict(o) = &out {
                *o.borrow_mut() = entries;
            }
            Ok(out)
        }),
        _ => return None,
    };
    Some(m)
}

fn set_method(recv: Value, name: &str) -> Option<Value> {
    fn with_set<T>(
        v: &Value,
        f: impl FnOnce(&mut indexmap::IndexMap<crate::value::HashKey, Value>) -> T,
    ) -> T {
        match v {
            Value::Set(s) => f(&mut s.borrow_mut()),
            _ => unreachable!(),
        }
    }
    let m = match name {
        "add" => bound("set.add", recv, |_it, r, args, kw| {
            reject_kwargs("add", &kw)?;
            expect_arity("add", &args, 1, 1)?;
            let k = args[0].hash_key()?;
            with_set(r, |s| s.insert(k, args[0].clone()));
            Ok(Value::None)
        }),
        "remove" => bound("set.remove", recv, |_it, r, args, kw| {
            reject_kwargs("remove", &kw)?;
            expect_arity("remove", &args, 1, 1)?;
            let k = args[0].hash_key()?;
            with_set(r, |s| match s.shift_remove(&k) {
                Some(_) => Ok(Value::None),
                None => Err(HostError::new(
                    ExcKind::KeyError,
                    args[0].to_repr_string(),
                )),
            })
        }),
        "discard" => bound("set.discard", recv, |_it, r, args, kw| {
            reject_kwargs("discard", &kw)?;
            expect_arity("discard", &args, 1, 1)?;
            let k = args[0].hash_key()?;
            with_set(r, |s| s.shift_remove(&k));
            Ok(Value::None)
        }),
        "clear" => bound("set.clear", recv, |_it, r, args, kw| {
            reject_kwargs("clear", &kw)?;
            expect_arity("clear", &args, 0, 0)?;
            with_set(r, |s| s.clear());
            Ok(Value::None)
        }),
        _ => return None,
    };
    Some(m)
}

fn tuple_method(recv: Value, name: &str) -> Option<Value> {
    fn items(v: &Value) -> Rc<Vec<Value>> {
        match v {
            Value::Tuple(t) => t.clone(),
            _ => unreachable!(),
        }
    }
    let m = match name {
        "count" => bound("tuple.count", recv, |_it, r, args, kw| {
            reject_kwargs("count", &kw)?;
            expect_arity("count", &args, 1, 1)?;
            let n = items(r).iter().filter(|v| v.eq_value(&args[0])).count();
            Ok(Value::Int(n as i64))
        }),
        "index" => bound("tuple.index", recv, |_it, r, args, kw| {
            reject_kwargs("index", &kw)?;
            expect_arity("index", &args, 1, 1)?;
            match items(r).iter().position(|v| v.eq_value(&args[0])) {
                Some(i) => Ok(Value::Int(i as i64)),
                None => Err(value_error("tuple.index(x): x not in tuple")),
            }
        }),
        _ => return None,
    };
    Some(m)
}

// ---------------------------------------------------------------------------
// Subscripts

pub fn get_item(base: &Value, index: &Value) -> VResult {
    match base {
        Value::List(l) => {
            let l = l.borrow();
            let i = seq_index(index, l.len(), "list")?;
            Ok(l[i].clone())
        }
        Value::Tuple(t) => {
            let i = seq_index(index, t.len(), "tuple")?;
            Ok(t[i].clone())
        }
        Value::Str(s) => {
            let chars: Vec<char> = s.chars().collect();
            let i = seq_index(index, chars.len(), "string")?;
            Ok(Value::str_value(chars[i].to_string()))
        }
        Value::Dict(d) => {
            let k = index.hash_key()?;
            match d.borrow().get(&k) {
                Some((_, v)) => Ok(v.clone()),
                None => Err(HostError::new(ExcKind::KeyError, index.to_repr_string())),
            }
        }
        Value::Range(r) => {
            let n = range_len(r);
            let i = seq_index(index, n as usize, "range")?;
            Ok(Value::Int(r.0 + r.2 * i as i64))
        }
        other => Err(type_error(format!(
            "'{}' object is not subscriptable",
            other.type_name()
        ))),
    }
}

fn seq_index(index: &Value, len: usize, what: &str) -> Result<usize, HostError> {
    let i = match index {
        Value::Int(i) => *i,
        Value::Bool(b) => *b as i64,
        other => {
            return Err(type_error(format!(
                "{what} indices must be integers, not '{}'",
                other.type_name()
            )))
        }
    };
    let adjusted = if i < 0 { i + len as i64 } else { i };
    if adjusted < 0 || adjusted as usize >= len {
        return Err(HostError::new(
            ExcKind::IndexError,
            format!("{what} index out of range"),
        ));
    }
    Ok(adjusted as usize)
}

pub fn get_slice(base: &Value, lower: Option<&Value>, upper: Option<&Value>) -> VResult {
    fn slice_bounds(
        len: usize,
        lower: Option<&Value>,
        upper: Option<&Value>,
    ) -> Result<(usize, usize), HostError> {
        let resolve = |v: Option<&Value>, default: i64| -> Result<i64, HostError> {
            match v {
                None | Some(Value::None) => Ok(default),
                Some(Value::Int(i)) => Ok(*i),
                Some(Value::Bool(b)) => Ok(*b as i64),
                Some(other) => Err(type_error(format!(
                    "slice indices must be integers or None, not '{}'",
                    other.type_name()
                ))),
            }
        };
        let clamp = |i: i64| -> usize {
            let i = if i < 0 { i + len as i64 } else { i };
            i.clamp(0, len as i64) as usize
        };
        let lo = clamp(resolve(lower, 0)?);
        let hi = clamp(resolve(upper, len as i64)?);
        Ok((lo, hi.max(lo)))
    }

    match base {
        Value::List(l) => {
            let l = l.borrow();
            let (lo, hi) = slice_bounds(l.len(), lower, upper)?;
            Ok(Value::new_list(l[lo..hi].to_vec()))
        }
        Value::Tuple(t) => {
            let (lo, hi) = slice_bounds(t.len(), lower, upper)?;
            Ok(Value::new_tuple(t[lo..hi].to_vec()))
        }
        Value::Str(s) => {
            let chars: Vec<char> = s.chars().collect();
            let (lo, hi) = slice_bounds(chars.len(), lower, upper)?;
            Ok(Value::str_value(chars[lo..hi].iter().collect::<String>()))
        }
        other => Err(type_error(format!(
            "'{}' object is not sliceable",
            other.type_name()
        ))),
    }
}

pub fn set_item(base: &Value, index: &Value, value: Value) -> Result<(), HostError> {
    match base {
        Value::List(l) => {
            let mut l = l.borrow_mut();
            let len = l.len();
            let i = seq_index(index, len, "list")?;
            l[i] = value;
            Ok(())
        }
        Value::Dict(d) => {
            let k = index.hash_key()?;
            d.borrow_mut().insert(k, (index.clone(), value));
            Ok(())
        }
        other => Err(type_error(format!(
            "'{}' object does not support item assignment",
            other.type_name()
        ))),
    }
}

// ---------------------------------------------------------------------------
// Operators

pub fn unary_op(op: UnaryOpKind, v: &Value) -> VResult {
    match op {
        UnaryOpKind::Not => Ok(Value::Bool(!v.truthy())),
        UnaryOpKind::Neg => match v {
            Value::Int(i) => match i.checked_neg() {
                Some(n) => Ok(Value::Int(n)),
                None => Ok(Value::Float(-(*i as f64))),
            },
            Value::Bool(b) => Ok(Value::Int(-(*b as i64))),
            Value::Float(f) => Ok(Value::Float(-f)),
            other => Err(type_error(format!(
                "bad operand type for unary -: '{}'",
                other.type_name()
            ))),
        },
        UnaryOpKind::Pos => match v {
            Value::Int(_) | Value::Float(_) => Ok(v.clone()),
            Value::Bool(b) => Ok(Value::Int(*b as i64)),
            other => Err(type_error(format!(
                "bad operand type for unary +: '{}'",
                other.type_name()
            ))),
        },
    }
}

fn as_int_like(v: &Value) -> Option<i64> {
    match v {
        Value::Int(i) => Some(*i),
        Value::Bool(b) => Some(*b as i64),
        _ => None,
    }
}

fn binop_type_error(op: BinOpKind, a: &Value, b: &Value) -> HostError {
    let sym = match op {
        BinOpKind::Add => "+",
        BinOpKind::Sub => "-",
        BinOpKind::Mul => "*",
        BinOpKind::Div => "/",
        BinOpKind::FloorDiv => "//",
        BinOpKind::Mod => "%",
        BinOpKind::Pow => "**",
    };
    type_error(format!(
        "unsupported operand type(s) for {sym}: '{}' and '{}'",
        a.type_name(),
        b.type_name()
    ))
}

pub fn binary_op(op: BinOpKind, a: &Value, b: &Value) -> VResult {
    use BinOpKind::*;

    // String formatting with `%` comes first: it never coerces numerically.
    if op == Mod {
        if let Value::Str(fmt) = a {
            return percent_format(fmt, b);
        }
    }

    match op {
        Add => match (a, b) {
            (Value::Str(x), Value::Str(y)) => {
                Ok(Value::str_value(format!("{}{}", x, y)))
            }
            (Value::List(x), Value::List(y)) => {
                let mut out = x.borrow().clone();
                out.extend(y.borrow().iter().cloned());
                Ok(Value::new_list(out))
            }
            (Value::Tuple(x), Value::Tuple(y)) => {
                let mut out = x.as_ref().clone();
                out.extend(y.iter().cloned());
                Ok(Value::new_tuple(out))
            }
            _ => numeric_binop(op, a, b),
        },
        Mul => match (a, b) {
            (Value::Str(s), n) | (n, Value::Str(s)) if as_int_like(n).is_some() => {
                let count = as_int_like(n).unwrap().max(0) as usize;
                Ok(Value::str_value(s.repeat(count)))
            }
            (Value::List(l), n) | (n, Value::List(l)) if as_int_like(n).is_some() => {
                let count = as_int_like(n).unwrap().max(0) as usize;
                let items = l.borrow();
                let mut out = Vec::with_capacity(items.len() * count);
                for _ in 0..count {
                    out.extend(items.iter().cloned());
                }
                Ok(Value::new_list(out))
            }
            (Value::Tuple(t), n) | (n, Value::Tuple(t)) if as_int_like(n).is_some() => {
                let count = as_int_like(n).unwrap().max(0) as usize;
                let mut out = Vec::with_capacity(t.len() * count);
                for _ in 0..count {
                    out.extend(t.iter().cloned());
                }
                Ok(Value::new_tuple(out))
            }
            _ => numeric_binop(op, a, b),
        },
        _ => numeric_binop(op, a, b),
    }
}

fn numeric_binop(op: BinOpKind, a: &Value, b: &Value) -> VResult {
    use BinOpKind::*;
    if !is_numeric(a) || !is_numeric(b) {
        return Err(binop_type_error(op, a, b));
    }
    // Integer path when both operands are int-like.
    if let (Some(x), Some(y)) = (as_int_like(a), as_int_like(b)) {
        return match op {
            Add => Ok(int_or_float(x.checked_add(y), x as f64 + y as f64)),
            Sub => Ok(int_or_float(x.checked_sub(y), x as f64 - y as f64)),
            Mul => Ok(int_or_float(x.checked_mul(y), x as f64 * y as f64)),
            Div => {
                if y == 0 {
                    Err(HostError::new(ExcKind::ZeroDivisionError, "division by zero"))
                } else {
                    Ok(Value::Float(x as f64 / y as f64))
                }
            }
            FloorDiv => {
                if y == 0 {
                    Err(HostError::new(
                        ExcKind::ZeroDivisionError,
                        "integer division or modulo by zero",
                    ))
                } else if x == i64::MIN && y == -1 {
                    Ok(Value::Float(-(x as f64)))
                } else {
                    Ok(Value::Int(floor_div(x, y)))
                }
            }
            Mod => {
                if y == 0 {
                    Err(HostError::new(
                        ExcKind::ZeroDivisionError,
                        "integer division or modulo by zero",
                    ))
                } else if x == i64::MIN && y == -1 {
                    Ok(Value::Int(0))
                } else {
                    Ok(Value::Int(floor_mod(x, y)))
                }
            }
            Pow => {
                if y >= 0 {
                    match y.try_into().ok().and_then(|e: u32| x.checked_pow(e)) {
                        Some(v) => Ok(Value::Int(v)),
                        None => Ok(Value::Float((x as f64).powf(y as f64))),
                    }
                } else {
                    Ok(Value::Float((x as f64).powi(y.max(-1000) as i32)))
                }
            }
        };
    }
    let x = numeric_as_f64(a);
    let y = numeric_as_f64(b);
    match op {
        Add => Ok(Value::Float(x + y)),
        Sub => Ok(Value::Float(x - y)),
        Mul => Ok(Value::Float(x * y)),
        Div => {
            if y == 0.0 {
                Err(HostError::new(ExcKind::ZeroDivisionError, "float division by zero"))
            } else {
                Ok(Value::Float(x / y))
            }
        }
        FloorDiv => {
            if y == 0.0 {
                Err(HostError::new(
                    ExcKind::ZeroDivisionError,
                    "float floor division by zero",
                ))
            } else {
                Ok(Value::Float((x / y).floor()))
            }
        }
        Mod => {
            if y == 0.0 {
                Err(HostError::new(ExcKind::ZeroDivisionError, "float modulo"))
            } else {
                Ok(Value::Float(x - y * (x / y).floor()))
            }
        }
        Pow => Ok(Value::Float(x.powf(y))),
    }
}

fn int_or_float(checked: Option<i64>, fallback: f64) -> Value {
    match checked {
        Some(v) => Value::Int(v),
        None => Value::Float(fallback),
    }
}

fn floor_mod(x: i64, y: i64) -> i64 {
    let r = x % y;
    if (r != 0) && ((r < 0) != (y < 0)) {
        r + y
    } else {
        r
    }
}

fn floor_div(x: i64, y: i64) -> i64 {
    let q = x / y;
    let r = x % y;
    if (r != 0) && ((r < 0) != (y < 0)) {
        q - 1
    } else {
        q
    }
}

fn percent_format(fmt: &str, right: &Value) -> VResult {
    let args: Vec<Value> = match right {
        Value::Tuple(items) => items.as_ref().clone(),
        other => vec![other.clone()],
    };
    let mut out = String::new();
    let mut arg_i = 0usize;
    let mut chars = fmt.chars().peekable();
    while let Some(c) = chars.next() {
        if c != '%' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('%') => out.push('%'),
            Some(spec) => {
                let arg = args.get(arg_i).ok_or_else(|| {
                    type_error("not enough arguments for format string")
                })?;
                arg_i += 1;
                match spec {
                    's' => out.push_str(&arg.to_display_string()),
                    'r' => out.push_str(&arg.to_repr_string()),
                    'd' => match arg {
                        Value::Int(i) => out.push_str(&i.to_string()),
                        Value::Bool(b) => out.push_str(&(*b as i64).to_string()),
                        Value::Float(f) => out.push_str(&(f.trunc() as i64).to_string()),
                        other => {
                            return Err(type_error(format!(
                                "%d format: a number is required, not {}",
                                other.type_name()
                            )))
                        }
                    },
                    'f' => match arg {
                        v if is_numeric(v) => {
                            out.push_str(&format!("{:.6}", numeric_as_f64(v)))
                        }
                        other => {
                            return Err(type_error(format!(
                                "%f format: a number is required, not {}",
                                other.type_name()
                            )))
                        }
                    },
                    other => {
                        return Err(value_error(format!(
                            "unsupported format character '{other}'"
                        )))
                    }
                }
            }
            None => return Err(value_error("incomplete format")),
        }
    }
    if arg_i < args.len() {
        return Err(type_error(
            "not all arguments converted during string formatting",
        ));
    }
    Ok(Value::str_value(out))
}

pub fn compare_op(op: CmpOpKind, a: &Value, b: &Value) -> Result<bool, HostError> {
    match op {
        CmpOpKind::Eq => Ok(a.eq_value(b)),
        CmpOpKind::NotEq => Ok(!a.eq_value(b)),
        CmpOpKind::Is => Ok(a.identical(b)),
        CmpOpKind::IsNot => Ok(!a.identical(b)),
        CmpOpKind::Lt => Ok(order_values(a, b)? == Ordering::Less),
        CmpOpKind::LtEq => Ok(order_values(a, b)? != Ordering::Greater),
        CmpOpKind::Gt => Ok(order_values(a, b)? == Ordering::Greater),
        CmpOpKind::GtEq => Ok(order_values(a, b)? != Ordering::Less),
        CmpOpKind::In => contains(a, b),
        CmpOpKind::NotIn => contains(a, b).map(|r| !r),
    }
}

fn contains(item: &Value, container: &Value) -> Result<bool, HostError> {
    match container {
        Value::List(l) => Ok(l.borrow().iter().any(|v| v.eq_value(item))),
        Value::Tuple(t) => Ok(t.iter().any(|v| v.eq_value(item))),
        Value::Set(s) => Ok(s.borrow().contains_key(&item.hash_key()?)),
        Value::Dict(d) => Ok(d.borrow().contains_key(&item.hash_key()?)),
        Value::Str(s) => match item {
            Value::Str(sub) => Ok(s.contains(sub.as_str())),
            other => Err(type_error(format!(
                "'in <string>' requires string as left operand, not {}",
                other.type_name()
            ))),
        },
        Value::Range(r) => match as_int_like(item) {
            Some(i) => Ok(range_contains(r, i)),
            None => Ok(false),
        },
        other => Err(type_error(format!(
            "argument of type '{}' is not iterable",
            other.type_name()
        ))),
    }
}

fn range_contains(r: &(i64, i64, i64), i: i64) -> bool {
    let (start, stop, step) = *r;
    if step > 0 {
        i >= start && i < stop && (i - start) % step == 0
    } else {
        i <= start && i > stop && (start - i) % (-step) == 0
    }
}

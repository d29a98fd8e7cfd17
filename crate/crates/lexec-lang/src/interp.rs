//! Tree-walking interpreter.
//!
//! Execution is observable through two channels: an optional [`LineTracker`]
//! that records which physical lines began, completed, and raised, and a
//! [`LoaderSet`] of three native functions that instrumented code imports via
//! the runtime-module preamble. Uninstrumented code never touches the
//! loaders; instrumented code routes every variable read, attribute read and
//! call through them.
//!
//! Two deliberate departures from the usual scoping rules of similar
//! languages, both documented for snippet authors:
//!
//! * Name resolution is a plain lexical chain walk at read time; assignment
//!   always binds in the innermost scope. There is no
//!   "assigned-anywhere-means-local" analysis.
//! * Calling a function with fewer positional arguments than parameters
//!   leaves the missing parameters unbound instead of failing the call;
//!   reading an unbound parameter then raises the undefined-name error,
//!   which instrumented code turns into an injection opportunity.

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap};
use std::rc::Rc;
use std::time::Instant;

use crate::ast::*;
use crate::builtins;
use crate::value::{numeric_as_f64, range_len, DummyObj, ExceptionObj, FunctionObj, LambdaObj, Value};
use crate::{ATTR_LOADER_FN, CALL_LOADER_FN, NAME_LOADER_FN, RUNTIME_MODULE};

// Each host-level call burns a sizeable chunk of Rust stack in the
// tree-walking evaluator; 64 keeps well inside the 2 MiB default of test
// threads while being deep enough for realistic snippets.
const MAX_CALL_DEPTH: usize = 64;

/// Built-in exception kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExcKind {
    Exception,
    NameError,
    AttributeError,
    TypeError,
    ValueError,
    KeyError,
    IndexError,
    ZeroDivisionError,
    RuntimeError,
    ImportError,
    AssertionError,
    StopIteration,
    RecursionError,
    /// Engine-level abort when the wall-clock budget is exhausted. Not
    /// catchable from snippet code, not even by a bare `except:`.
    Timeout,
}

impl ExcKind {
    pub fn name(self) -> &'static str {
        match self {
            ExcKind::Exception => "Exception",
            ExcKind::NameError => "NameError",
            ExcKind::AttributeError => "AttributeError",
            ExcKind::TypeError => "TypeError",
            ExcKind::ValueError => "ValueError",
            ExcKind::KeyError => "KeyError",
            ExcKind::IndexError => "IndexError",
            ExcKind::ZeroDivisionError => "ZeroDivisionError",
            ExcKind::RuntimeError => "RuntimeError",
            ExcKind::ImportError => "ImportError",
            ExcKind::AssertionError => "AssertionError",
            ExcKind::StopIteration => "StopIteration",
            ExcKind::RecursionError => "RecursionError",
            ExcKind::Timeout => "Timeout",
        }
    }

    pub fn catchable(self) -> bool {
        self != ExcKind::Timeout
    }

    pub fn all() -> &'static [ExcKind] {
        &[
            ExcKind::Exception,
            ExcKind::NameError,
            ExcKind::AttributeError,
            ExcKind::TypeError,
            ExcKind::ValueError,
            ExcKind::KeyError,
            ExcKind::IndexError,
            ExcKind::ZeroDivisionError,
            ExcKind::RuntimeError,
            ExcKind::ImportError,
            ExcKind::AssertionError,
            ExcKind::StopIteration,
            ExcKind::RecursionError,
        ]
    }
}

/// A raised exception travelling up the Rust call stack.
#[derive(Debug, Clone)]
pub struct HostError {
    pub kind: ExcKind,
    pub message: String,
    /// 1-based line of the raise site, filled in at the innermost
    /// evaluation that knows it.
    pub line: Option<u32>,
    /// Set once the line has been recorded as an exception origin, so
    /// enclosing statements do not re-record it while unwinding.
    pub origin_noted: bool,
    /// The exception instance, when one was explicitly constructed.
    pub payload: Option<Value>,
}

impl HostError {
    pub fn new(kind: ExcKind, message: impl Into<String>) -> HostError {
        HostError {
            kind,
            message: message.into(),
            line: None,
            origin_noted: false,
            payload: None,
        }
    }

    pub fn at(kind: ExcKind, message: impl Into<String>, line: u32) -> HostError {
        HostError {
            line: Some(line),
            ..HostError::new(kind, message)
        }
    }

    pub fn or_line(mut self, line: u32) -> HostError {
        if self.line.is_none() {
            self.line = Some(line);
        }
        self
    }

    /// The exception as a first-class value, for `except ... as e` binding.
    pub fn to_value(&self) -> Value {
        match &self.payload {
            Some(v) => v.clone(),
            None => Value::Exception(Rc::new(ExceptionObj {
                kind: self.kind,
                message: self.message.clone(),
            })),
        }
    }
}

pub type VResult = Result<Value, HostError>;

// ---------------------------------------------------------------------------
// Scopes

#[derive(Clone)]
pub struct Env(Rc<RefCell<Scope>>);

struct Scope {
    vars: HashMap<String, Value>,
    parent: Option<Env>,
}

impl Env {
    pub fn new_root() -> Env {
        Env(Rc::new(RefCell::new(Scope {
            vars: HashMap::new(),
            parent: None,
        })))
    }

    pub fn child(&self) -> Env {
        Env(Rc::new(RefCell::new(Scope {
            vars: HashMap::new(),
            parent: Some(self.clone()),
        })))
    }

    pub fn get(&self, name: &str) -> Option<Value> {
        let scope = self.0.borrow();
        if let Some(v) = scope.vars.get(name) {
            return Some(v.clone());
        }
        scope.parent.as_ref().and_then(|p| p.get(name))
    }

    pub fn set(&self, name: &str, value: Value) {
        self.0.borrow_mut().vars.insert(name.to_string(), value);
    }

    pub fn snapshot(&self) -> Vec<(String, Value)> {
        let scope = self.0.borrow();
        let mut entries: Vec<(String, Value)> = scope
            .vars
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        entries
    }
}

// ---------------------------------------------------------------------------
// Line tracking

/// Records which lines began executing, which completed, and which were the
/// origin of a raised exception (caught or not).
#[derive(Debug, Default, Clone)]
pub struct LineTracker {
    executed: BTreeSet<u32>,
    completed: BTreeSet<u32>,
    exc_origins: BTreeSet<u32>,
}

impl LineTracker {
    pub fn begin(&mut self, line: u32) {
        self.executed.insert(line);
    }

    pub fn complete(&mut self, first: u32, last: u32) {
        for l in first..=last {
            self.executed.insert(l);
            self.completed.insert(l);
        }
    }

    pub fn origin(&mut self, line: u32) {
        self.exc_origins.insert(line);
    }

    pub fn executed_lines(&self) -> &BTreeSet<u32> {
        &self.executed
    }

    pub fn exception_origins(&self) -> &BTreeSet<u32> {
        &self.exc_origins
    }

    /// A line counts as covered when it completed and never hosted a raise.
    pub fn covered_lines(&self) -> BTreeSet<u32> {
        self.completed
            .difference(&self.exc_origins)
            .copied()
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Loader binding

/// The three runtime hooks instrumented code imports. Defaults pass every
/// load straight through to the real operation.
#[derive(Clone)]
pub struct LoaderSet {
    pub name_loader: Value,
    pub attr_loader: Value,
    pub call_loader: Value,
}

impl LoaderSet {
    pub fn lookup(&self, name: &str) -> Option<Value> {
        match name {
            NAME_LOADER_FN => Some(self.name_loader.clone()),
            ATTR_LOADER_FN => Some(self.attr_loader.clone()),
            CALL_LOADER_FN => Some(self.call_loader.clone()),
            _ => None,
        }
    }
}

// ---------------------------------------------------------------------------
// The interpreter

pub struct Interp {
    pub out: Rc<RefCell<Vec<u8>>>,
    pub tracker: Option<Rc<RefCell<LineTracker>>>,
    pub loaders: LoaderSet,
    pub deadline: Option<Instant>,
    builtin_env: Env,
    depth: usize,
    active_exceptions: Vec<HostError>,
}

impl Interp {
    pub fn new() -> Interp {
        let builtin_env = Env::new_root();
        builtins::install(&builtin_env);
        Interp {
            out: Rc::new(RefCell::new(Vec::new())),
            tracker: None,
            loaders: builtins::passthrough_loaders(),
            deadline: None,
            builtin_env,
            depth: 0,
            active_exceptions: Vec::new(),
        }
    }

    /// Fresh global scope whose parent resolves the builtins.
    pub fn new_globals(&self) -> Env {
        self.builtin_env.child()
    }

    pub fn output_string(&self) -> String {
        String::from_utf8_lossy(&self.out.borrow()).into_owned()
    }

    pub fn run_program(&mut self, program: &Program, globals: &Env) -> Result<(), HostError> {
        for stmt in &program.body {
            match self.exec_stmt(stmt, globals)? {
                Flow::Normal => {}
                // The parser rejects return/break/continue at top level.
                _ => unreachable!("control flow escaped top level"),
            }
        }
        Ok(())
    }

    pub fn check_deadline(&self, line: u32) -> Result<(), HostError> {
        if let Some(deadline) = self.deadline {
            if Instant::now() >= deadline {
                return Err(HostError::at(
                    ExcKind::Timeout,
                    "execution timed out",
                    line,
                ));
            }
        }
        Ok(())
    }

    /// Deadline probe for builtin-internal loops where no source line is in
    /// scope.
    pub fn tick(&self) -> Result<(), HostError> {
        if let Some(deadline) = self.deadline {
            if Instant::now() >= deadline {
                return Err(HostError::new(ExcKind::Timeout, "execution timed out"));
            }
        }
        Ok(())
    }

    fn track_begin(&self, line: u32) {
        if let Some(t) = &self.tracker {
            t.borrow_mut().begin(line);
        }
    }

    fn track_complete(&self, h: HeaderLines) {
        if let Some(t) = &self.tracker {
            t.borrow_mut().complete(h.first, h.last);
        }
    }

    // ---- statements --------------------------------------------------------

    fn exec_block(&mut self, stmts: &[Stmt], env: &Env) -> Result<Flow, HostError> {
        for s in stmts {
            match self.exec_stmt(s, env)? {
                Flow::Normal => {}
                other => return Ok(other),
            }
        }
        Ok(Flow::Normal)
    }

    pub fn exec_stmt(&mut self, stmt: &Stmt, env: &Env) -> Result<Flow, HostError> {
        self.check_deadline(stmt.header.first)?;
        self.track_begin(stmt.header.first);
        let mut result = self.exec_stmt_kind(stmt, env);
        if let Err(e) = &mut result {
            if !e.origin_noted {
                e.origin_noted = true;
                if let (Some(t), Some(line)) = (&self.tracker, e.line) {
                    t.borrow_mut().origin(line);
                }
            }
        }
        result
    }

    fn exec_stmt_kind(&mut self, stmt: &Stmt, env: &Env) -> Result<Flow, HostError> {
        let header = stmt.header;
        match &stmt.kind {
            StmtKind::Expr(e) => {
                self.eval(e, env)?;
                self.track_complete(header);
                Ok(Flow::Normal)
            }
            StmtKind::Assign { targets, value } => {
                let v = self.eval(value, env)?;
                for t in targets {
                    self.assign_target(t, v.clone(), env)?;
                }
                self.track_complete(header);
                Ok(Flow::Normal)
            }
            StmtKind::AugAssign { target, op, value } => {
                self.exec_aug_assign(target, *op, value, env)?;
                self.track_complete(header);
                Ok(Flow::Normal)
            }
            StmtKind::If { arms } => {
                for arm in arms {
                    self.track_begin(arm.header.first);
                    match &arm.cond {
                        Some(cond) => {
                            let c = self.eval(cond, env)?;
                            self.track_complete(arm.header);
                            if c.truthy() {
                                return self.exec_block(&arm.body, env);
                            }
                        }
                        None => {
                            self.track_complete(arm.header);
                            return self.exec_block(&arm.body, env);
                        }
                    }
                }
                Ok(Flow::Normal)
            }
            StmtKind::While { cond, body } => {
                loop {
                    self.check_deadline(header.first)?;
                    self.track_begin(header.first);
                    let c = self.eval(cond, env)?;
                    self.track_complete(header);
                    if !c.truthy() {
                        break;
                    }
                    match self.exec_block(body, env)? {
                        Flow::Normal | Flow::Continue => {}
                        Flow::Break => break,
                        r @ Flow::Return(_) => return Ok(r),
                    }
                }
                Ok(Flow::Normal)
            }
            StmtKind::For { target, iter, body } => {
                let iterable = self.eval(iter, env)?;
                let it = ValueIter::new(&iterable).map_err(|e| e.or_line(iter.line))?;
                self.track_complete(header);
                for item in it {
                    self.check_deadline(header.first)?;
                    self.bind_loop_target(target, item, env)?;
                    match self.exec_block(body, env)? {
                        Flow::Normal | Flow::Continue => {}
                        Flow::Break => break,
                        r @ Flow::Return(_) => return Ok(r),
                    }
                }
                Ok(Flow::Normal)
            }
            StmtKind::Def {
                name,
                params,
                body,
                ..
            } => {
                let defaults = self.eval_defaults(params, env)?;
                let func = Value::Function(Rc::new(FunctionObj {
                    name: name.clone(),
                    params: params.clone(),
                    body: Rc::new(body.clone()),
                    closure: env.clone(),
                    defaults,
                }));
                env.set(name, func);
                self.track_complete(header);
                Ok(Flow::Normal)
            }
            StmtKind::Return(value) => {
                let v = match value {
                    Some(e) => self.eval(e, env)?,
                    None => Value::None,
                };
                self.track_complete(header);
                Ok(Flow::Return(v))
            }
            StmtKind::Raise(value) => match value {
                Some(e) => {
                    let v = self.eval(e, env)?;
                    Err(self.raise_from_value(v, stmt.header.first))
                }
                None => match self.active_exceptions.last() {
                    Some(err) => {
                        let mut err = err.clone();
                        err.line = Some(stmt.header.first);
                        err.origin_noted = false;
                        Err(err)
                    }
                    None => Err(HostError::at(
                        ExcKind::RuntimeError,
                        "No active exception to re-raise",
                        stmt.header.first,
                    )),
                },
            },
            StmtKind::Try {
                body,
                handlers,
                finally,
            } => {
                self.track_complete(header);
                let mut pending = match self.exec_block(body, env) {
                    Ok(flow) => Ok(flow),
                    Err(err) if err.kind.catchable() => {
                        self.run_handlers(&err, handlers, env)?
                    }
                    Err(err) => Err(err),
                };
                if let Some((fin_body, fin_header)) = finally {
                    self.track_begin(fin_header.first);
                    self.track_complete(*fin_header);
                    match self.exec_block(fin_body, env)? {
                        Flow::Normal => {}
                        // A return/break/continue in finally wins over the
                        // pending outcome.
                        other => pending = Ok(other),
                    }
                }
                pending
            }
            StmtKind::With { ctx, alias, body } => {
                let resource = self.eval(ctx, env)?;
                let entered = match &resource {
                    Value::DummyResource(_) => resource.clone(),
                    other => {
                        return Err(HostError::at(
                            ExcKind::TypeError,
                            format!(
                                "'{}' object does not support the context manager protocol",
                                other.type_name()
                            ),
                            ctx.line,
                        ))
                    }
                };
                self.track_complete(header);
                if let Some(name) = alias {
                    env.set(name, entered);
                }
                self.exec_block(body, env)
            }
            StmtKind::Import { module, names } => {
                if module == RUNTIME_MODULE && !names.is_empty() {
                    for n in names {
                        match self.loaders.lookup(n) {
                            Some(v) => env.set(n, v),
                            None => {
                                return Err(HostError::at(
                                    ExcKind::ImportError,
                                    format!("cannot import name '{n}' from '{RUNTIME_MODULE}'"),
                                    header.first,
                                ))
                            }
                        }
                    }
                    self.track_complete(header);
                    Ok(Flow::Normal)
                } else {
                    Err(HostError::at(
                        ExcKind::ImportError,
                        format!("No module named '{module}'"),
                        header.first,
                    ))
                }
            }
            StmtKind::Assert { cond, msg } => {
                let c = self.eval(cond, env)?;
                if c.truthy() {
                    self.track_complete(header);
                    Ok(Flow::Normal)
                } else {
                    let message = match msg {
                        Some(m) => self.eval(m, env)?.to_display_string(),
                        None => String::new(),
                    };
                    Err(HostError::at(
                        ExcKind::AssertionError,
                        message,
                        header.first,
                    ))
                }
            }
            StmtKind::Pass => {
                self.track_complete(header);
                Ok(Flow::Normal)
            }
            StmtKind::Break => {
                self.track_complete(header);
                Ok(Flow::Break)
            }
            StmtKind::Continue => {
                self.track_complete(header);
                Ok(Flow::Continue)
            }
        }
    }

    fn run_handlers(
        &mut self,
        err: &HostError,
        handlers: &[ExceptHandler],
        env: &Env,
    ) -> Result<Result<Flow, HostError>, HostError> {
        for handler in handlers {
            self.track_begin(handler.header.first);
            let matches = match &handler.filter {
                None => true,
                Some(filter) => {
                    let f = self.eval(filter, env)?;
                    exception_matches(err, &f).map_err(|e| e.or_line(filter.line))?
                }
            };
            self.track_complete(handler.header);
            if matches {
                if let Some(alias) = &handler.alias {
                    env.set(alias, err.to_value());
                }
                self.active_exceptions.push(err.clone());
                let r = self.exec_block(&handler.body, env);
                self.active_exceptions.pop();
                return Ok(r);
            }
        }
        Ok(Err(err.clone()))
    }

    fn raise_from_value(&self, v: Value, line: u32) -> HostError {
        match v {
            Value::Exception(e) => HostError {
                kind: e.kind,
                message: e.message.clone(),
                line: Some(line),
                origin_noted: false,
                payload: Some(Value::Exception(e)),
            },
            Value::ExcType(kind) => HostError::at(kind, "", line),
            other => HostError::at(
                ExcKind::TypeError,
                format!(
                    "exceptions must derive from BaseException, not '{}'",
                    other.type_name()
                ),
                line,
            ),
        }
    }

    fn eval_defaults(
        &mut self,
        params: &[Param],
        env: &Env,
    ) -> Result<Vec<Option<Value>>, HostError> {
        params
            .iter()
            .map(|p| match &p.default {
                Some(e) => self.eval(e, env).map(Some),
                None => Ok(None),
            })
            .collect()
    }

    fn assign_target(&mut self, target: &Target, value: Value, env: &Env) -> Result<(), HostError> {
        match target {
            Target::Name { name, .. } => {
                env.set(name, value);
                Ok(())
            }
            Target::Attribute { base, attr, .. } => {
                let b = self.eval(base, env)?;
                builtins::set_attr(&b, attr, value).map_err(|e| e.or_line(base.line))
            }
            Target::Subscript { base, index, .. } => {
                let b = self.eval(base, env)?;
                match index {
                    SubscriptIndex::Index(i) => {
                        let iv = self.eval(i, env)?;
                        builtins::set_item(&b, &iv, value).map_err(|e| e.or_line(base.line))
                    }
                    SubscriptIndex::Slice { .. } => Err(HostError::at(
                        ExcKind::TypeError,
                        "slice assignment is not supported",
                        base.line,
                    )),
                }
            }
            Target::TupleNames { names, line, .. } => {
                let items = sequence_items(&value).ok_or_else(|| {
                    HostError::at(
                        ExcKind::TypeError,
                        format!("cannot unpack non-sequence '{}'", value.type_name()),
                        *line,
                    )
                })?;
                if items.len() != names.len() {
                    return Err(HostError::at(
                        ExcKind::ValueError,
                        format!(
                            "expected {} values to unpack, got {}",
                            names.len(),
                            items.len()
                        ),
                        *line,
                    ));
                }
                for ((name, _), item) in names.iter().zip(items) {
                    env.set(name, item);
                }
                Ok(())
            }
        }
    }

    fn bind_loop_target(&mut self, target: &Target, value: Value, env: &Env) -> Result<(), HostError> {
        self.assign_target(target, value, env)
    }

    fn exec_aug_assign(
        &mut self,
        target: &Target,
        op: BinOpKind,
        value: &Expr,
        env: &Env,
    ) -> Result<(), HostError> {
        match target {
            Target::Name { name, line, .. } => {
                let current = env.get(name).ok_or_else(|| {
                    HostError::at(
                        ExcKind::NameError,
                        format!("name '{name}' is not defined"),
                        *line,
                    )
                })?;
                let rhs = self.eval(value, env)?;
                let result =
                    builtins::binary_op(op, &current, &rhs).map_err(|e| e.or_line(value.line))?;
                env.set(name, result);
                Ok(())
            }
            Target::Attribute { base, attr, .. } => {
                let b = self.eval(base, env)?;
                let current =
                    builtins::get_attr(&b, attr).map_err(|e| e.or_line(base.line))?;
                let rhs = self.eval(value, env)?;
                let result =
                    builtins::binary_op(op, &current, &rhs).map_err(|e| e.or_line(value.line))?;
                builtins::set_attr(&b, attr, result).map_err(|e| e.or_line(base.line))
            }
            Target::Subscript { base, index, .. } => {
                let b = self.eval(base, env)?;
                let idx = match index {
                    SubscriptIndex::Index(i) => self.eval(i, env)?,
                    SubscriptIndex::Slice { .. } => {
                        return Err(HostError::at(
                            ExcKind::TypeError,
                            "slice assignment is not supported",
                            base.line,
                        ))
                    }
                };
                let current =
                    builtins::get_item(&b, &idx).map_err(|e| e.or_line(base.line))?;
                let rhs = self.eval(value, env)?;
                let result =
                    builtins::binary_op(op, &current, &rhs).map_err(|e| e.or_line(value.line))?;
                builtins::set_item(&b, &idx, result).map_err(|e| e.or_line(base.line))
            }
            Target::TupleNames { .. } => unreachable!("parser rejects tuple aug-assign"),
        }
    }

    // ---- expressions -------------------------------------------------------

    pub fn eval(&mut self, expr: &Expr, env: &Env) -> VResult {
        match &expr.kind {
            ExprKind::NoneLit => Ok(Value::None),
            ExprKind::Bool(b) => Ok(Value::Bool(*b)),
            ExprKind::Int(i) => Ok(Value::Int(*i)),
            ExprKind::Float(f) => Ok(Value::Float(*f)),
            ExprKind::Str(s) => Ok(Value::str_value(s.clone())),
            ExprKind::Name(name) => self.load_name(name, env, expr.line),
            ExprKind::List(items) => {
                let vals = items
                    .iter()
                    .map(|e| self.eval(e, env))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Value::new_list(vals))
            }
            ExprKind::Tuple { items, .. } => {
                let vals = items
                    .iter()
                    .map(|e| self.eval(e, env))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Value::new_tuple(vals))
            }
            ExprKind::Set(items) => {
                let set = Value::empty_set();
                for e in items {
                    let v = self.eval(e, env)?;
                    let k = v.hash_key().map_err(|er| er.or_line(e.line))?;
                    if let Value::Set(s) = &set {
                        s.borrow_mut().insert(k, v);
                    }
                }
                Ok(set)
            }
            ExprKind::Dict(pairs) => {
                let dict = Value::empty_dict();
                for (ke, ve) in pairs {
                    let k = self.eval(ke, env)?;
                    let v = self.eval(ve, env)?;
                    let hk = k.hash_key().map_err(|er| er.or_line(ke.line))?;
                    if let Value::Dict(d) = &dict {
                        d.borrow_mut().insert(hk, (k, v));
                    }
                }
                Ok(dict)
            }
            ExprKind::Attribute { base, attr, .. } => {
                let b = self.eval(base, env)?;
                builtins::get_attr(&b, attr).map_err(|e| e.or_line(expr.line))
            }
            ExprKind::Subscript { base, index } => {
                let b = self.eval(base, env)?;
                match index {
                    SubscriptIndex::Index(i) => {
                        let iv = self.eval(i, env)?;
                        builtins::get_item(&b, &iv).map_err(|e| e.or_line(expr.line))
                    }
                    SubscriptIndex::Slice { lower, upper } => {
                        let lo = match lower {
                            Some(e) => Some(self.eval(e, env)?),
                            None => None,
                        };
                        let hi = match upper {
                            Some(e) => Some(self.eval(e, env)?),
                            None => None,
                        };
                        builtins::get_slice(&b, lo.as_ref(), hi.as_ref())
                            .map_err(|e| e.or_line(expr.line))
                    }
                }
            }
            ExprKind::Call {
                callee,
                args,
                kwargs,
            } => {
                let c = self.eval(callee, env)?;
                let mut arg_vals = Vec::with_capacity(args.len());
                for a in args {
                    arg_vals.push(self.eval(a, env)?);
                }
                let mut kw_vals = Vec::with_capacity(kwargs.len());
                for (name, e) in kwargs {
                    kw_vals.push((name.clone(), self.eval(e, env)?));
                }
                self.call_value(&c, arg_vals, kw_vals)
                    .map_err(|e| e.or_line(expr.line))
            }
            ExprKind::Unary { op, operand } => {
                let v = self.eval(operand, env)?;
                builtins::unary_op(*op, &v).map_err(|e| e.or_line(expr.line))
            }
            ExprKind::Binary { left, op, right } => {
                let l = self.eval(left, env)?;
                let r = self.eval(right, env)?;
                builtins::binary_op(*op, &l, &r).map_err(|e| e.or_line(expr.line))
            }
            ExprKind::BoolChain { op, values } => {
                let mut last = self.eval(&values[0], env)?;
                for v in &values[1..] {
                    let keep_going = match op {
                        BoolOpKind::And => last.truthy(),
                        BoolOpKind::Or => !last.truthy(),
                    };
                    if !keep_going {
                        return Ok(last);
                    }
                    last = self.eval(v, env)?;
                }
                Ok(last)
            }
            ExprKind::Compare { first, rest } => {
                let mut prev = self.eval(first, env)?;
                for (op, e) in rest {
                    let next = self.eval(e, env)?;
                    let ok = builtins::compare_op(*op, &prev, &next)
                        .map_err(|er| er.or_line(e.line))?;
                    if !ok {
                        return Ok(Value::Bool(false));
                    }
                    prev = next;
                }
                Ok(Value::Bool(true))
            }
            ExprKind::Conditional { then, cond, orelse } => {
                if self.eval(cond, env)?.truthy() {
                    self.eval(then, env)
                } else {
                    self.eval(orelse, env)
                }
            }
            ExprKind::Lambda { params, body } => {
                let defaults = self.eval_defaults(params, env)?;
                Ok(Value::Lambda(Rc::new(LambdaObj {
                    params: params.clone(),
                    body: Rc::new((**body).clone()),
                    closure: env.clone(),
                    defaults,
                })))
            }
            ExprKind::Paren(inner) => self.eval(inner, env),
        }
    }

    fn load_name(&self, name: &str, env: &Env, line: u32) -> VResult {
        env.get(name).ok_or_else(|| {
            HostError::at(
                ExcKind::NameError,
                format!("name '{name}' is not defined"),
                line,
            )
        })
    }

    /// Invokes any callable value with already-evaluated arguments.
    pub fn call_value(
        &mut self,
        callee: &Value,
        args: Vec<Value>,
        kwargs: Vec<(String, Value)>,
    ) -> VResult {
        if self.depth >= MAX_CALL_DEPTH {
            return Err(HostError::new(
                ExcKind::RecursionError,
                "maximum recursion depth exceeded",
            ));
        }
        match callee {
            Value::Function(f) => {
                let locals = f.closure.child();
                bind_params(&f.name, &f.params, &f.defaults, args, kwargs, &locals)?;
                self.depth += 1;
                let r = self.exec_block(&f.body, &locals);
                self.depth -= 1;
                match r? {
                    Flow::Return(v) => Ok(v),
                    _ => Ok(Value::None),
                }
            }
            Value::Lambda(f) => {
                let locals = f.closure.child();
                bind_params("<lambda>", &f.params, &f.defaults, args, kwargs, &locals)?;
                self.depth += 1;
                let r = self.eval(&f.body, &locals);
                self.depth -= 1;
                r
            }
            Value::Builtin(b) => {
                self.depth += 1;
                let r = (b.func)(self, args, kwargs);
                self.depth -= 1;
                r
            }
            Value::ExcType(kind) => {
                let message = match args.len() {
                    0 => String::new(),
                    1 => args[0].to_display_string(),
                    _ => args
                        .iter()
                        .map(|a| a.to_display_string())
                        .collect::<Vec<_>>()
                        .join(", "),
                };
                Ok(Value::Exception(Rc::new(ExceptionObj {
                    kind: *kind,
                    message,
                })))
            }
            // An injected callable invoked outside the call loader (by
            // builtin internals, say) yields a fresh placeholder instead of
            // executing anything.
            Value::DummyCallable(_) => Ok(Value::Dummy(DummyObj::fresh())),
            other => Err(HostError::new(
                ExcKind::TypeError,
                format!("'{}' object is not callable", other.type_name()),
            )),
        }
    }
}

impl Default for Interp {
    fn default() -> Self {
        Interp::new()
    }
}

#[derive(Debug)]
pub enum Flow {
    Normal,
    Break,
    Continue,
    Return(Value),
}

fn bind_params(
    fname: &str,
    params: &[Param],
    defaults: &[Option<Value>],
    args: Vec<Value>,
    kwargs: Vec<(String, Value)>,
    locals: &Env,
) -> Result<(), HostError> {
    if args.len() > params.len() {
        return Err(HostError::new(
            ExcKind::TypeError,
            format!(
                "{fname}() takes {} positional argument{} but {} were given",
                params.len(),
                if params.len() == 1 { "" } else { "s" },
                args.len()
            ),
        ));
    }
    let mut bound = vec![false; params.len()];
    for (i, arg) in args.into_iter().enumerate() {
        locals.set(&params[i].name, arg);
        bound[i] = true;
    }
    for (name, value) in kwargs {
        match params.iter().position(|p| p.name == name) {
            Some(i) => {
                if bound[i] {
                    return Err(HostError::new(
                        ExcKind::TypeError,
                        format!("{fname}() got multiple values for argument '{name}'"),
                    ));
                }
                locals.set(&name, value);
                bound[i] = true;
            }
            None => {
                return Err(HostError::new(
                    ExcKind::TypeError,
                    format!("{fname}() got an unexpected keyword argument '{name}'"),
                ))
            }
        }
    }
    for (i, param) in params.iter().enumerate() {
        if !bound[i] {
            if let Some(d) = &defaults[i] {
                locals.set(&param.name, d.clone());
            }
            // Parameters without defaults stay unbound: reading them raises
            // the undefined-name error, the injection point for guided runs.
        }
    }
    Ok(())
}

fn exception_matches(err: &HostError, filter: &Value) -> Result<bool, HostError> {
    match filter {
        Value::ExcType(k) => Ok(*k == err.kind || *k == ExcKind::Exception),
        Value::Tuple(items) => {
            for item in items.iter() {
                if exception_matches(err, item)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        other => Err(HostError::new(
            ExcKind::TypeError,
            format!(
                "catching '{}' values is not allowed; expected an exception class",
                other.type_name()
            ),
        )),
    }
}

fn sequence_items(v: &Value) -> Option<Vec<Value>> {
    match v {
        Value::List(items) => Some(items.borrow().clone()),
        Value::Tuple(items) => Some(items.as_ref().clone()),
        _ => None,
    }
}

/// Iterator over host values, snapshotting containers and streaming ranges.
pub struct ValueIter {
    state: IterState,
}

enum IterState {
    Items(std::vec::IntoIter<Value>),
    Range { cur: i64, stop: i64, step: i64 },
}

impl ValueIter {
    pub fn new(v: &Value) -> Result<ValueIter, HostError> {
        let state = match v {
            Value::List(items) => IterState::Items(items.borrow().clone().into_iter()),
            Value::Tuple(items) => IterState::Items(items.as_ref().clone().into_iter()),
            Value::Set(items) => IterState::Items(
                items
                    .borrow()
                    .values()
                    .cloned()
                    .collect::<Vec<_>>()
                    .into_iter(),
            ),
            Value::Dict(items) => IterState::Items(
                items
                    .borrow()
                    .values()
                    .map(|(k, _)| k.clone())
                    .collect::<Vec<_>>()
                    .into_iter(),
            ),
            Value::Str(s) => IterState::Items(
                s.chars()
                    .map(|c| Value::str_value(c.to_string()))
                    .collect::<Vec<_>>()
                    .into_iter(),
            ),
            Value::Range(r) => IterState::Range {
                cur: r.0,
                stop: r.1,
                step: r.2,
            },
            other => {
                return Err(HostError::new(
                    ExcKind::TypeError,
                    format!("'{}' object is not iterable", other.type_name()),
                ))
            }
        };
        Ok(ValueIter { state })
    }

    pub fn size_hint_len(&self) -> Option<usize> {
        match &self.state {
            IterState::Items(it) => Some(it.len()),
            IterState::Range { cur, stop, step } => {
                Some(range_len(&(*cur, *stop, *step)).max(0) as usize)
            }
        }
    }
}

impl Iterator for ValueIter {
    type Item = Value;

    fn next(&mut self) -> Option<Value> {
        match &mut self.state {
            IterState::Items(it) => it.next(),
            IterState::Range { cur, stop, step } => {
                let more = if *step > 0 { *cur < *stop } else { *cur > *stop };
                if !more || *step == 0 {
                    return None;
                }
                let v = *cur;
                *cur += *step;
                Some(Value::Int(v))
            }
        }
    }
}

/// Total-order comparison used by `<`-family operators, `sorted`, `min` and
/// `max`. Errors on unorderable type combinations.
pub fn order_values(a: &Value, b: &Value) -> Result<std::cmp::Ordering, HostError> {
    match (a, b) {
        (x, y) if crate::value::is_numeric(x) && crate::value::is_numeric(y) => {
            numeric_as_f64(x)
                .partial_cmp(&numeric_as_f64(y))
                .ok_or_else(|| HostError::new(ExcKind::TypeError, "nan is unorderable"))
        }
        (Value::Str(x), Value::Str(y)) => Ok(x.cmp(y)),
        (Value::List(x), Value::List(y)) => {
            let (x, y) = (x.borrow().clone(), y.borrow().clone());
            order_sequences(&x, &y)
        }
        (Value::Tuple(x), Value::Tuple(y)) => order_sequences(x, y),
        _ => Err(HostError::new(
            ExcKind::TypeError,
            format!(
                "'<' not supported between instances of '{}' and '{}'",
                a.type_name(),
                b.type_name()
            ),
        )),
    }
}

fn order_sequences(x: &[Value], y: &[Value]) -> Result<std::cmp::Ordering, HostError> {
    for (a, b) in x.iter().zip(y.iter()) {
        if a.eq_value(b) {
            continue;
        }
        return order_values(a, b);
    }
    Ok(x.len().cmp(&y.len()))
}

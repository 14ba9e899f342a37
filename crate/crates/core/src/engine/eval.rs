use std::sync::Arc;

use super::export::{Export, Path, PathKey, SlotKind};
use super::value::{Closure, Env, Function, NbrMap, Value};
use super::{Fault, RoundContext, RoundOutput, RuntimeError};
use crate::builtins::{self, Invoke};
use crate::lang::{Expr, ExprKind, Literal, Program};

const MAX_CALL_DEPTH: usize = 96;

pub(super) struct Evaluator<'r, 'c> {
    program: &'r Program,
    ctx: &'r RoundContext<'c>,
    path: Vec<PathKey>,
    export: Export,
    depth: usize,
    /// >0 while running a closure on behalf of a higher-order builtin; such
    /// closures may be called many times at one path, so `rep`/`nbr` are
    /// rejected there.
    local_only: usize,
}

pub(super) fn run(program: &Program, ctx: &RoundContext<'_>) -> Result<RoundOutput, RuntimeError> {
    let main = program.main.as_ref().ok_or(RuntimeError { fault: Fault::NoMain, path: Path::default() })?;
    let mut ev = Evaluator { program, ctx, path: Vec::new(), export: Export::new(), depth: 0, local_only: 0 };
    let result = ev.eval(main, &Env::default())?;
    if result.contains_nbr_map() {
        return Err(ev.error(Fault::NbrMapEscape("round result")));
    }
    Ok(RoundOutput { result, export: ev.export })
}

impl<'r, 'c> Evaluator<'r, 'c> {
    fn error(&self, fault: Fault) -> RuntimeError {
        match fault {
            Fault::Nested(inner) => *inner,
            fault => RuntimeError { fault, path: Path(self.path.clone()) },
        }
    }

    fn child(&mut self, e: &Expr, env: &Env) -> Result<Value, RuntimeError> {
        self.path.push(PathKey::Slot(e.slot));
        let r = self.eval(e, env);
        self.path.pop();
        r
    }

    fn record(&mut self, kind: SlotKind, value: Value) -> Result<(), RuntimeError> {
        if value.contains_nbr_map() {
            let what = if kind == SlotKind::Rep { "rep state" } else { "nbr payload" };
            return Err(self.error(Fault::NbrMapEscape(what)));
        }
        if !self.export.insert(Path(self.path.clone()), kind, value) {
            return Err(self.error(Fault::Alignment(format!("path {} written twice in one round", Path(self.path.clone())))));
        }
        Ok(())
    }

    fn eval(&mut self, e: &Expr, env: &Env) -> Result<Value, RuntimeError> {
        match &e.kind {
            ExprKind::Literal(Literal::Bool(b)) => Ok(Value::Bool(*b)),
            ExprKind::Literal(Literal::Num(n)) => Ok(Value::Num(*n)),
            ExprKind::Literal(Literal::Sensor(name)) => Err(self.error(Fault::Type(format!("sensor name `{name}` used outside `sense`")))),
            ExprKind::Var(name) => env.lookup(name).cloned().ok_or_else(|| self.error(Fault::Type(format!("unbound variable `{name}`")))),
            ExprKind::Lambda(lambda) => Ok(Value::Func(Function::Closure(Arc::new(Closure { lambda: lambda.clone(), env: env.clone() })))),
            ExprKind::DefRef(name) => match self.program.def(name) {
                Some(def) => Ok(Value::Func(Function::Def(def.clone()))),
                None => Err(self.error(Fault::Type(format!("unknown definition `{name}`")))),
            },
            ExprKind::BuiltinRef(name) => match builtins::lookup(name) {
                Some(b) if !b.is_sense() => Ok(Value::Func(Function::Builtin(b))),
                _ => Err(self.error(Fault::Type(format!("`{name}` cannot be used as a value")))),
            },
            ExprKind::Apply { target, args } => {
                if let (ExprKind::BuiltinRef(name), [arg]) = (&target.kind, args.as_slice()) {
                    if &**name == "sense" {
                        let ExprKind::Literal(Literal::Sensor(sensor)) = &arg.kind else {
                            return Err(self.error(Fault::Type("`sense` expects a sensor name".into())));
                        };
                        return self.ctx.sensors.get(&**sensor).cloned().ok_or_else(|| self.error(Fault::UnboundSensor(sensor.to_string())));
                    }
                }
                let f = self.child(target, env)?;
                let mut values = Vec::with_capacity(args.len());
                for a in args {
                    values.push(self.child(a, env)?);
                }
                self.apply(f, values)
            }
            ExprKind::Rep { init, update } => {
                if self.local_only > 0 {
                    return Err(self.error(Fault::LocalOnly("rep")));
                }
                let prev = self.ctx.prev_export.and_then(|x| x.get_kind(&self.path, SlotKind::Rep)).cloned();
                let state = match prev {
                    Some(prev) => {
                        let f = self.child(update, env)?;
                        self.apply(f, vec![prev])?
                    }
                    None => self.child(init, env)?,
                };
                self.record(SlotKind::Rep, state.clone())?;
                Ok(state)
            }
            ExprKind::Nbr(body) => {
                if self.local_only > 0 {
                    return Err(self.error(Fault::LocalOnly("nbr")));
                }
                let own = self.child(body, env)?;
                let gathered: NbrMap = self
                    .ctx
                    .nbr_exports
                    .iter()
                    .filter_map(|(d, ex)| ex.get_kind(&self.path, SlotKind::Nbr).map(|v| (*d, v.clone())))
                    .collect();
                self.record(SlotKind::Nbr, own)?;
                Ok(Value::NbrMap(gathered))
            }
        }
    }

    fn apply(&mut self, f: Value, args: Vec<Value>) -> Result<Value, RuntimeError> {
        let func = match f {
            Value::Func(func) => func,
            other => return Err(self.error(Fault::NotAFunction(other.type_name()))),
        };
        if let Function::Builtin(b) = func {
            return builtins::call(b, self, args).map_err(|fault| self.error(fault));
        }
        if let Some(expected) = func.arity() {
            if expected != args.len() {
                return Err(self.error(Fault::Arity { function: func.tag().to_string(), expected, got: args.len() }));
            }
        }
        if self.depth >= MAX_CALL_DEPTH {
            return Err(self.error(Fault::RecursionLimit));
        }
        let (tag, params, body, base) = match &func {
            Function::Closure(c) => (c.lambda.tag.clone(), &c.lambda.params, &c.lambda.body, c.env.clone()),
            Function::Def(d) => (d.tag(), &d.params, &d.body, Env::default()),
            Function::Builtin(_) => unreachable!(),
        };
        let env = params.iter().zip(args).fold(base, |env, (p, v)| env.bind(p.clone(), v));
        self.depth += 1;
        self.path.push(PathKey::Tag(tag));
        let r = self.eval(body, &env);
        self.path.pop();
        self.depth -= 1;
        r
    }
}

impl Invoke for Evaluator<'_, '_> {
    fn invoke(&mut self, f: &Value, args: Vec<Value>) -> Result<Value, Fault> {
        self.local_only += 1;
        let r = self.apply(f.clone(), args);
        self.local_only -= 1;
        r.map_err(|e| Fault::Nested(Box::new(e)))
    }

    fn context(&self) -> &RoundContext<'_> {
        self.ctx
    }
}

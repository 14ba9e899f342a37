use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;

/// Interned-ish identifier. Cheap to clone, shared between AST and runtime.
pub type Name = Arc<str>;

/// Function identity token used to extend alignment paths when a closure or a
/// user definition is applied.
///
/// Lambda tags are `<owner>#<n>`, where `owner` is the enclosing definition
/// (or `main`) and `n` the lambda's pre-order index inside it. They do not
/// depend on line/column, so pretty-printing and re-parsing preserves them.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tag(pub Name);

impl Tag {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Bool(bool),
    Num(f64),
    /// Sensor name; only valid as the single argument of `sense`.
    Sensor(Name),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lambda {
    pub params: Vec<Name>,
    pub body: Expr,
    pub tag: Tag,
}

/// An expression node. `slot` is the node's index among its siblings and is
/// the alignment key pushed on the evaluation path when the node is entered.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub slot: u16,
    pub kind: ExprKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Literal(Literal),
    Var(Name),
    Lambda(Arc<Lambda>),
    Apply { target: Box<Expr>, args: Vec<Expr> },
    Rep { init: Box<Expr>, update: Box<Expr> },
    Nbr(Box<Expr>),
    BuiltinRef(Name),
    DefRef(Name),
}

impl Expr {
    pub fn new(slot: u16, kind: ExprKind) -> Self {
        Self { slot, kind }
    }

    /// Visits this node and every descendant in pre-order.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match &self.kind {
            ExprKind::Literal(_) | ExprKind::Var(_) | ExprKind::BuiltinRef(_) | ExprKind::DefRef(_) => {}
            ExprKind::Lambda(lambda) => lambda.body.walk(f),
            ExprKind::Apply { target, args } => {
                target.walk(f);
                for arg in args {
                    arg.walk(f);
                }
            }
            ExprKind::Rep { init, update } => {
                init.walk(f);
                update.walk(f);
            }
            ExprKind::Nbr(body) => body.walk(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Def {
    pub name: Name,
    pub params: Vec<Name>,
    pub body: Expr,
}

impl Def {
    /// Tag pushed on the path when this definition is applied.
    pub fn tag(&self) -> Tag {
        Tag(self.name.clone())
    }
}

/// A parsed program: user definitions in source order plus an optional main
/// expression. Library sources (such as the standard library) have no main.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Program {
    pub defs: IndexMap<Name, Arc<Def>>,
    pub main: Option<Expr>,
}

impl Program {
    pub fn def(&self, name: &str) -> Option<&Arc<Def>> {
        self.defs.get(name)
    }

    /// Pre-order list of every lambda tag in the program, defs first.
    pub fn lambda_tags(&self) -> Vec<Tag> {
        let mut tags = Vec::new();
        let mut collect = |e: &Expr| {
            if let ExprKind::Lambda(l) = &e.kind {
                tags.push(l.tag.clone());
            }
        };
        for def in self.defs.values() {
            def.body.walk(&mut collect);
        }
        if let Some(main) = &self.main {
            main.walk(&mut collect);
        }
        tags
    }
}

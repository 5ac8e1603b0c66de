use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Tanh,
}

impl UnaryOp {
    /// Function name as written in source, `None` for prefix negation.
    pub fn name(self) -> Option<&'static str> {
        match self {
            UnaryOp::Neg => None,
            UnaryOp::Sin => Some("sin"),
            UnaryOp::Cos => Some("cos"),
            UnaryOp::Exp => Some("exp"),
            UnaryOp::Log => Some("log"),
            UnaryOp::Sqrt => Some("sqrt"),
            UnaryOp::Tanh => Some("tanh"),
        }
    }

    pub fn from_name(name: &str) -> Option<UnaryOp> {
        Some(match name {
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "exp" => UnaryOp::Exp,
            "log" => UnaryOp::Log,
            "sqrt" => UnaryOp::Sqrt,
            "tanh" => UnaryOp::Tanh,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    pub fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinaryOp::Add | BinaryOp::Sub => 1,
            BinaryOp::Mul | BinaryOp::Div => 2,
        }
    }
}

/// Expression tree node. Variables are zero-based: `Var(0)` prints as `x1`.
#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Const(f64),
    Var(usize),
    Time,
    Unary(UnaryOp, Box<Node>),
    Binary(BinaryOp, Box<Node>, Box<Node>),
    /// Power with a constant exponent.
    Pow(Box<Node>, f64),
}

impl Node {
    pub fn constant(value: f64) -> Node {
        Node::Const(value)
    }

    pub fn var(index: usize) -> Node {
        Node::Var(index)
    }

    pub fn unary(op: UnaryOp, arg: Node) -> Node {
        Node::Unary(op, Box::new(arg))
    }

    pub fn binary(op: BinaryOp, lhs: Node, rhs: Node) -> Node {
        Node::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn pow(base: Node, exponent: f64) -> Node {
        Node::Pow(Box::new(base), exponent)
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Node::Const(_) | Node::Time => None,
            Node::Var(i) => Some(*i),
            Node::Unary(_, a) | Node::Pow(a, _) => a.max_var(),
            Node::Binary(_, a, b) => match (a.max_var(), b.max_var()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
        }
    }

    pub fn uses_time(&self) -> bool {
        match self {
            Node::Time => true,
            Node::Const(_) | Node::Var(_) => false,
            Node::Unary(_, a) | Node::Pow(a, _) => a.uses_time(),
            Node::Binary(_, a, b) => a.uses_time() || b.uses_time(),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.max_var().is_none() && !self.uses_time()
    }

    /// Replaces `t` by `x1` and shifts every spatial variable up by one.
    pub(crate) fn suspended(&self) -> Node {
        match self {
            Node::Const(c) => Node::Const(*c),
            Node::Time => Node::Var(0),
            Node::Var(i) => Node::Var(i + 1),
            Node::Unary(op, a) => Node::unary(*op, a.suspended()),
            Node::Binary(op, a, b) => Node::binary(*op, a.suspended(), b.suspended()),
            Node::Pow(a, p) => Node::pow(a.suspended(), *p),
        }
    }

    // binding strength used by the printer: atoms 4, ^ 3, prefix minus 2.5 (as 25), ...
    fn print_level(&self) -> u8 {
        match self {
            Node::Const(c) if *c < 0.0 || c.is_sign_negative() => 0,
            Node::Const(_) | Node::Var(_) | Node::Time => 40,
            Node::Unary(UnaryOp::Neg, _) => 25,
            Node::Unary(_, _) => 40,
            Node::Pow(_, _) => 30,
            Node::Binary(op, _, _) => op.precedence() * 10,
        }
    }
}

fn fmt_number(f: &mut fmt::Formatter<'_>, value: f64) -> fmt::Result {
    // Debug formatting of f64 is the shortest string that round-trips.
    if value.is_sign_negative() {
        write!(f, "(-{:?})", -value)
    } else {
        write!(f, "{value:?}")
    }
}

fn fmt_operand(f: &mut fmt::Formatter<'_>, node: &Node, min_level: u8) -> fmt::Result {
    if node.print_level() < min_level {
        write!(f, "(")?;
        fmt::Display::fmt(node, f)?;
        write!(f, ")")
    } else {
        fmt::Display::fmt(node, f)
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Const(c) => fmt_number(f, *c),
            Node::Var(i) => write!(f, "x{}", i + 1),
            Node::Time => write!(f, "t"),
            Node::Unary(UnaryOp::Neg, a) => {
                write!(f, "-")?;
                // negation binds looser than ^ but tighter than * and /
                fmt_operand(f, a, 30)
            }
            Node::Unary(op, a) => write!(f, "{}({})", op.name().unwrap_or("?"), a),
            Node::Pow(base, exponent) => {
                fmt_operand(f, base, 40)?;
                write!(f, "^")?;
                fmt_number(f, *exponent)
            }
            Node::Binary(op, lhs, rhs) => {
                let level = op.precedence() * 10;
                fmt_operand(f, lhs, level)?;
                write!(f, " {} ", op.symbol())?;
                // left-associative: an equal-precedence right operand needs parentheses
                fmt_operand(f, rhs, level + 1)
            }
        }
    }
}

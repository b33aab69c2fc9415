//! Coinductive streams as simple-transition-system coalgebras: a state with
//! an observation and a continuation, unfolded on demand. Streams are never
//! materialized; `merge` and `split` build new states implementing their
//! defining equations directly, so every operation is total and productive.
//!
//! Stream equality is undecidable in general; this module only ever compares
//! prefixes to a caller-chosen depth, and [`stream_distance`] returns an
//! explicit upper bound when no difference is found within the depth.

use std::fmt;
use std::sync::Arc;

/// An intensional infinite stream: current observation plus a thunked
/// continuation. Cloning is cheap (shared thunks).
pub struct Stream<A> {
    head: A,
    tail: Arc<dyn Fn() -> Stream<A> + Send + Sync>,
}

impl<A: Clone> Clone for Stream<A> {
    fn clone(&self) -> Self {
        Stream {
            head: self.head.clone(),
            tail: Arc::clone(&self.tail),
        }
    }
}

impl<A: Clone + Send + Sync + 'static> Stream<A> {
    /// The unique coalgebra morphism into streams: unfold a state token
    /// through its observation and continuation maps.
    pub fn from_coalgebra<S, O, C>(state: S, observe: O, step: C) -> Stream<A>
    where
        S: Clone + Send + Sync + 'static,
        O: Fn(&S) -> A + Send + Sync + 'static,
        C: Fn(&S) -> S + Send + Sync + 'static,
    {
        let observe = Arc::new(observe);
        let step = Arc::new(step);
        Self::from_coalgebra_shared(state, observe, step)
    }

    fn from_coalgebra_shared<S>(
        state: S,
        observe: Arc<dyn Fn(&S) -> A + Send + Sync>,
        step: Arc<dyn Fn(&S) -> S + Send + Sync>,
    ) -> Stream<A>
    where
        S: Clone + Send + Sync + 'static,
    {
        let head = observe(&state);
        let tail = {
            let observe = Arc::clone(&observe);
            let step = Arc::clone(&step);
            Arc::new(move || {
                Self::from_coalgebra_shared(step(&state), Arc::clone(&observe), Arc::clone(&step))
            })
        };
        Stream { head, tail }
    }

    /// Cycles through a nonempty symbol list forever.
    pub fn cyclic(symbols: Vec<A>) -> Stream<A> {
        assert!(!symbols.is_empty(), "cyclic generator needs symbols");
        let n = symbols.len();
        Self::from_coalgebra(0usize, move |i| symbols[*i].clone(), move |i| (i + 1) % n)
    }

    pub fn constant(symbol: A) -> Stream<A> {
        Self::from_coalgebra((), move |_| symbol.clone(), |_| ())
    }

    pub fn head(&self) -> A {
        self.head.clone()
    }

    pub fn tail(&self) -> Stream<A> {
        (self.tail)()
    }

    /// First `k` observations along the continuation orbit.
    pub fn unfold(&self, k: usize) -> Prefix<A> {
        let mut symbols = Vec::with_capacity(k);
        let mut cur = self.clone();
        for _ in 0..k {
            symbols.push(cur.head());
            cur = cur.tail();
        }
        Prefix { symbols }
    }
}

/// A finite window onto a stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prefix<A> {
    pub symbols: Vec<A>,
}

impl<A> Prefix<A> {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

impl fmt::Display for Prefix<char> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.symbols {
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Interleaves two streams, `s` first: merge(x::sigma, tau) = x::merge(tau, sigma).
pub fn merge<A: Clone + Send + Sync + 'static>(s: &Stream<A>, t: &Stream<A>) -> Stream<A> {
    let t = t.clone();
    let s_tail = Arc::clone(&s.tail);
    Stream {
        head: s.head.clone(),
        tail: Arc::new(move || merge(&t, &s_tail())),
    }
}

fn every_other<A: Clone + Send + Sync + 'static>(s: &Stream<A>) -> Stream<A> {
    let s_tail = Arc::clone(&s.tail);
    Stream {
        head: s.head.clone(),
        tail: Arc::new(move || every_other(&s_tail().tail())),
    }
}

/// Separates a stream into its even- and odd-position substreams. The odd
/// component is the even component one phase later, so the defining
/// equation split(x::y::sigma) = (x::split(sigma).0, y::split(sigma).1)
/// holds without lookahead beyond two symbols.
pub fn split<A: Clone + Send + Sync + 'static>(s: &Stream<A>) -> (Stream<A>, Stream<A>) {
    (every_other(s), every_other(&s.tail()))
}

/// Exact dyadic stream distance, or an explicit upper bound when the two
/// prefixes agree through `depth`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamDistance {
    /// Prefixes first differ at `position` (0-indexed): distance 2^-position.
    Exact { position: u32 },
    /// No difference within `depth` symbols: distance at most 2^-depth.
    AtMost { depth: u32 },
}

impl StreamDistance {
    pub fn value(&self) -> f64 {
        match self {
            StreamDistance::Exact { position } => 0.5f64.powi(*position as i32),
            StreamDistance::AtMost { depth } => 0.5f64.powi(*depth as i32),
        }
    }
}

impl fmt::Display for StreamDistance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StreamDistance::Exact { position } => write!(f, "2^-{position}"),
            StreamDistance::AtMost { depth } => write!(f, "<= 2^-{depth}"),
        }
    }
}

/// Compares the two streams symbol by symbol up to `depth`.
pub fn stream_distance<A>(s: &Stream<A>, t: &Stream<A>, depth: u32) -> StreamDistance
where
    A: Clone + PartialEq + Send + Sync + 'static,
{
    assert!(depth >= 1, "depth must be at least 1");
    let mut a = s.clone();
    let mut b = t.clone();
    for position in 0..depth {
        if a.head() != b.head() {
            return StreamDistance::Exact { position };
        }
        a = a.tail();
        b = b.tail();
    }
    StreamDistance::AtMost { depth }
}

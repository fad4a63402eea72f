//! Page-space geometry: points, axis-aligned rectangles and quadrilaterals.
//!
//! Coordinates are raster pixels with the origin at the top-left corner and
//! y growing downward.

use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeTuple, Serializer};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::marker::PhantomData;

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T> Point<T> {
    pub const fn new(x: T, y: T) -> Self {
        Self { x, y }
    }
}

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Rect<T> {
    pub x0: T,
    pub y0: T,
    pub x1: T,
    pub y1: T,
}

impl<T: Scalar> Rect<T> {
    pub fn new(x0: T, y0: T, x1: T, y1: T) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> T {
        self.x1.clone() - self.x0.clone()
    }

    pub fn height(&self) -> T {
        self.y1.clone() - self.y0.clone()
    }

    /// Smallest rectangle containing both.
    pub fn union(&self, other: &Self) -> Self {
        Self {
            x0: T::min_of(self.x0.clone(), other.x0.clone()),
            y0: T::min_of(self.y0.clone(), other.y0.clone()),
            x1: T::max_of(self.x1.clone(), other.x1.clone()),
            y1: T::max_of(self.y1.clone(), other.y1.clone()),
        }
    }

    /// Bounding hull of a non-empty collection, `None` when empty.
    pub fn hull<'a, I>(rects: I) -> Option<Self>
    where
        I: IntoIterator<Item = &'a Self>,
        T: 'a,
    {
        let mut it = rects.into_iter();
        let first = it.next()?.clone();
        Some(it.fold(first, |acc, r| acc.union(r)))
    }

    pub fn contains(&self, other: &Self) -> bool {
        self.x0 <= other.x0 && self.y0 <= other.y0 && self.x1 >= other.x1 && self.y1 >= other.y1
    }

    /// Length of the overlap of the two vertical extents (zero if disjoint).
    pub fn vertical_overlap(&self, other: &Self) -> T {
        let top = T::max_of(self.y0.clone(), other.y0.clone());
        let bottom = T::min_of(self.y1.clone(), other.y1.clone());
        if bottom > top {
            bottom - top
        } else {
            T::zero()
        }
    }

    pub fn to_quad(&self) -> Quad<T> {
        Quad::from_rect(self)
    }
}

/// Four vertices listed clockwise starting at the top-left one.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Quad<T> {
    pub points: [Point<T>; 4],
}

impl<T: Scalar> Quad<T> {
    pub fn new(points: [Point<T>; 4]) -> Self {
        Self { points }
    }

    pub fn from_rect(r: &Rect<T>) -> Self {
        Self {
            points: [
                Point::new(r.x0.clone(), r.y0.clone()),
                Point::new(r.x1.clone(), r.y0.clone()),
                Point::new(r.x1.clone(), r.y1.clone()),
                Point::new(r.x0.clone(), r.y1.clone()),
            ],
        }
    }

    /// Builds a quad from the flat `[x1, y1, …, x4, y4]` layout used on disk.
    pub fn from_flat(c: [T; 8]) -> Self {
        let [x1, y1, x2, y2, x3, y3, x4, y4] = c;
        Self {
            points: [
                Point::new(x1, y1),
                Point::new(x2, y2),
                Point::new(x3, y3),
                Point::new(x4, y4),
            ],
        }
    }

    pub fn to_flat(&self) -> [T; 8] {
        let [a, b, c, d] = self.points.clone();
        [a.x, a.y, b.x, b.y, c.x, c.y, d.x, d.y]
    }

    pub fn bounds(&self) -> Rect<T> {
        let mut r = Rect::new(
            self.points[0].x.clone(),
            self.points[0].y.clone(),
            self.points[0].x.clone(),
            self.points[0].y.clone(),
        );
        for p in &self.points[1..] {
            r.x0 = T::min_of(r.x0, p.x.clone());
            r.y0 = T::min_of(r.y0, p.y.clone());
            r.x1 = T::max_of(r.x1, p.x.clone());
            r.y1 = T::max_of(r.y1, p.y.clone());
        }
        r
    }

    /// True when the quad equals its own bounding rectangle in canonical
    /// vertex order.
    pub fn is_axis_aligned(&self) -> bool {
        *self == Quad::from_rect(&self.bounds())
    }

    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> Quad<U> {
        Quad {
            points: [0, 1, 2, 3].map(|i| Point {
                x: f(&self.points[i].x),
                y: f(&self.points[i].y),
            }),
        }
    }
}

impl<T: Serialize> Serialize for Quad<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut tup = serializer.serialize_tuple(8)?;
        for p in &self.points {
            tup.serialize_element(&p.x)?;
            tup.serialize_element(&p.y)?;
        }
        tup.end()
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for Quad<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct QuadVisitor<T>(PhantomData<T>);

        impl<'de, T: Deserialize<'de>> Visitor<'de> for QuadVisitor<T> {
            type Value = Quad<T>;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an array of 8 coordinates")
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Quad<T>, A::Error> {
                let mut next = |i: usize| -> Result<T, A::Error> {
                    seq.next_element()?.ok_or_else(|| de::Error::invalid_length(i, &self))
                };
                let (x1, y1, x2, y2) = (next(0)?, next(1)?, next(2)?, next(3)?);
                let (x3, y3, x4, y4) = (next(4)?, next(5)?, next(6)?, next(7)?);
                if seq.next_element::<de::IgnoredAny>()?.is_some() {
                    return Err(de::Error::invalid_length(9, &self));
                }
                Ok(Quad {
                    points: [
                        Point::new(x1, y1),
                        Point::new(x2, y2),
                        Point::new(x3, y3),
                        Point::new(x4, y4),
                    ],
                })
            }
        }

        deserializer.deserialize_tuple(8, QuadVisitor(PhantomData))
    }
}

use std::collections::BTreeSet;

use super::{region_between, CausalOrder, EventId, FiniteOrder, OrderError};
use crate::slices::{enumerate_slices, Slice};

/// A map of events between finite causal orders. Validity (monotone and
/// strict-order reflecting) is checked by [`OrderMorphism::check_morphism`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderMorphism {
    domain: FiniteOrder,
    codomain: FiniteOrder,
    map: Vec<EventId>,
}

/// The result of pulling a slice back along a morphism.
#[derive(Debug, Clone)]
pub struct Pullback {
    /// Induced suborder of the domain on the preimage of the slice.
    pub order: FiniteOrder,
    /// For each event of `order`, the corresponding domain event.
    pub embedding: Vec<EventId>,
    /// Slice sections, in the event ids of `order`.
    pub slices: Vec<Slice<EventId>>,
}

impl OrderMorphism {
    pub fn new(
        domain: FiniteOrder,
        codomain: FiniteOrder,
        map: Vec<EventId>,
    ) -> Result<Self, OrderError> {
        if map.len() != domain.len() {
            return Err(OrderError::InvalidMorphism(format!(
                "map has {} entries for {} domain events",
                map.len(),
                domain.len()
            )));
        }
        if let Some(bad) = map.iter().find(|e| !codomain.contains(e)) {
            return Err(OrderError::UnknownEvent(bad.to_string()));
        }
        Ok(OrderMorphism {
            domain,
            codomain,
            map,
        })
    }

    /// Builds from event names on both sides.
    pub fn from_names<S: AsRef<str>>(
        domain: FiniteOrder,
        codomain: FiniteOrder,
        pairs: &[(S, S)],
    ) -> Result<Self, OrderError> {
        let mut map = vec![None; domain.len()];
        for (a, b) in pairs {
            map[domain.id(a.as_ref())?.index()] = Some(codomain.id(b.as_ref())?);
        }
        let map = map
            .into_iter()
            .enumerate()
            .map(|(i, m)| m.ok_or_else(|| OrderError::InvalidMorphism(format!("no image for `{}`", domain.names()[i]))))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(domain, codomain, map)
    }

    pub fn identity(o: &FiniteOrder) -> Self {
        OrderMorphism {
            domain: o.clone(),
            codomain: o.clone(),
            map: o.ids().collect(),
        }
    }

    pub fn domain(&self) -> &FiniteOrder {
        &self.domain
    }

    pub fn codomain(&self) -> &FiniteOrder {
        &self.codomain
    }

    pub fn map(&self) -> &[EventId] {
        &self.map
    }

    pub fn apply(&self, e: EventId) -> EventId {
        self.map[e.index()]
    }

    /// `other ∘ self`.
    pub fn then(&self, other: &OrderMorphism) -> Result<OrderMorphism, OrderError> {
        if self.codomain != other.domain {
            return Err(OrderError::InvalidMorphism("codomain/domain mismatch".into()));
        }
        Ok(OrderMorphism {
            domain: self.domain.clone(),
            codomain: other.codomain.clone(),
            map: self.map.iter().map(|&e| other.apply(e)).collect(),
        })
    }

    /// Monotone, and f(x) < f(y) implies x < y.
    pub fn check_morphism(&self) -> bool {
        let ids: Vec<EventId> = self.domain.ids().collect();
        ids.iter().all(|x| {
            ids.iter().all(|y| {
                let fx = self.apply(*x);
                let fy = self.apply(*y);
                (!self.domain.leq(x, y) || self.codomain.leq(&fx, &fy))
                    && (!self.codomain.lt(&fx, &fy) || self.domain.lt(x, y))
            })
        })
    }

    pub fn is_injective(&self) -> bool {
        let set: BTreeSet<_> = self.map.iter().collect();
        set.len() == self.map.len()
    }

    pub fn is_surjective(&self) -> bool {
        let set: BTreeSet<_> = self.map.iter().collect();
        set.len() == self.codomain.len()
    }

    pub fn image(&self) -> BTreeSet<EventId> {
        self.map.iter().copied().collect()
    }

    /// Injective with convex image.
    pub fn is_region_morphism(&self) -> bool {
        self.is_injective() && self.check_morphism() && super::is_region(&self.codomain, &self.image())
    }

    /// For every x ≤ y in the codomain there are x′, y′ in the domain with
    /// f(x′) ≤ x ≤ y ≤ f(y′).
    pub fn is_refinement(&self) -> bool {
        let image = self.image();
        let cod = &self.codomain;
        cod.ids().all(|x| {
            cod.ids().filter(|y| cod.leq(&x, y)).all(|y| {
                image.iter().any(|a| cod.leq(a, &x)) && image.iter().any(|b| cod.leq(&y, b))
            })
        })
    }

    /// Factors f as an embedding after a surjection onto the image suborder.
    pub fn epi_mono_factor(&self) -> (OrderMorphism, OrderMorphism) {
        let image: Vec<EventId> = self.image().into_iter().collect();
        let image_order = self.codomain.suborder(&image);
        let pos = |e: EventId| EventId(image.binary_search(&e).expect("in image") as u32);
        let quotient = OrderMorphism {
            domain: self.domain.clone(),
            codomain: image_order.clone(),
            map: self.map.iter().map(|&e| pos(e)).collect(),
        };
        let embedding = OrderMorphism {
            domain: image_order,
            codomain: self.codomain.clone(),
            map: image,
        };
        (quotient, embedding)
    }

    /// Factors an injective f as a region morphism after a refinement. The
    /// intermediate order is the union of diamonds between image points.
    pub fn region_refinement_factor(&self) -> Result<(OrderMorphism, OrderMorphism), OrderError> {
        if !self.is_injective() {
            return Err(OrderError::InvalidMorphism("region/refinement factorisation needs an injective morphism".into()));
        }
        let image = self.image();
        let theta: Vec<EventId> = region_between(&self.codomain, &image, &image)?
            .into_iter()
            .collect();
        let theta_order = self.codomain.suborder(&theta);
        let pos = |e: EventId| EventId(theta.binary_search(&e).expect("in theta") as u32);
        let refinement = OrderMorphism {
            domain: self.domain.clone(),
            codomain: theta_order.clone(),
            map: self.map.iter().map(|&e| pos(e)).collect(),
        };
        let region = OrderMorphism {
            domain: theta_order,
            codomain: self.codomain.clone(),
            map: theta,
        };
        Ok((refinement, region))
    }

    /// Slice sections over Σ: disjoint unions of one slice (possibly empty)
    /// of each fibre f*({x}), x ∈ Σ.
    pub fn pullback_slice(&self, sigma: &Slice<EventId>) -> Result<Pullback, OrderError> {
        for e in sigma.iter() {
            if !self.codomain.contains(e) {
                return Err(OrderError::UnknownEvent(e.to_string()));
            }
        }
        let embedding: Vec<EventId> = self
            .domain
            .ids()
            .filter(|x| sigma.contains(&self.apply(*x)))
            .collect();
        let order = self.domain.suborder(&embedding);
        let mut slices: Vec<BTreeSet<EventId>> = vec![BTreeSet::new()];
        for target in sigma.iter() {
            let fibre: Vec<EventId> = (0..embedding.len())
                .filter(|&i| self.apply(embedding[i]) == *target)
                .map(|i| EventId(i as u32))
                .collect();
            let fibre_order = order.suborder(&fibre);
            let sections: Vec<BTreeSet<EventId>> = enumerate_slices(&fibre_order, None)?
                .map(|s| s.iter().map(|e| fibre[e.index()]).collect())
                .collect();
            slices = slices
                .iter()
                .flat_map(|acc| {
                    sections.iter().map(move |s| acc.union(s).copied().collect())
                })
                .collect();
        }
        Ok(Pullback {
            order,
            embedding,
            slices: slices.into_iter().map(Slice::from_set_unchecked).collect(),
        })
    }
}

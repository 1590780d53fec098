//! Soundness of the synthetic generator, checked pairwise with local formulas.

use crema_core::eval::{generate_synthetic, DistractorKind, GenSpec, OfferLabel};
use crema_core::model::GeoPoint;

fn km(p: GeoPoint, q: GeoPoint) -> f64 {
    let (a, b) = (p.lat().to_radians(), q.lat().to_radians());
    let dl = (q.lon() - p.lon()).to_radians();
    6371.0 * (a.sin() * b.sin() + a.cos() * b.cos() * dl.cos()).clamp(-1.0, 1.0).acos()
}

fn cos(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

#[test]
fn windows_and_unique_best() {
    let spec = GenSpec { n_pairs: 120, seed: 3, ..Default::default() };
    let c = generate_synthetic(&spec).unwrap();
    let score = |ri: usize, oi: usize| {
        let (r, o) = (&c.requests[ri], &c.offers[oi]);
        let days = (r.timestamp.unwrap() - o.timestamp.unwrap()).abs() as f64 / 86_400.0;
        let d = km(r.geo.unwrap(), o.geo.unwrap());
        let wt = (1.0 - days / spec.decay_time_days).max(0.0);
        let wl = (1.0 - d / spec.decay_distance_km).max(0.0);
        (cos(c.request_embeddings.row(ri), c.offer_embeddings.row(oi)) * wt * wl, days, d)
    };
    for (ri, req) in c.requests.iter().enumerate() {
        let true_id = c.truth.get(&req.id).unwrap();
        let ti = c.offers.iter().position(|o| o.id == true_id).unwrap();
        assert_eq!(c.labels[ti], OfferLabel::True);
        let (best, days, d) = score(ri, ti);
        assert!(days <= spec.time_window_days + 1e-9, "{} days", days);
        assert!(d <= spec.distance_window_km + 1e-6, "{} km", d);
        assert!(best > 0.0);
        for oi in 0..c.offers.len() {
            if oi == ti {
                continue;
            }
            let (s, days, d) = score(ri, oi);
            assert!(s < best, "{} beats true offer for {}", c.offers[oi].id, req.id);
            match c.labels[oi] {
                OfferLabel::Distractor(DistractorKind::TemporalOut) if c.offers[oi].id.contains(&req.id[1..]) => {
                    assert!(days > spec.decay_time_days)
                }
                OfferLabel::Distractor(DistractorKind::SpatialOut | DistractorKind::HighCosineFar)
                    if c.offers[oi].id.contains(&req.id[1..]) =>
                {
                    assert!(d > spec.decay_distance_km)
                }
                _ => {}
            }
        }
    }
}

#[test]
fn same_seed_same_corpus() {
    let spec = GenSpec { n_pairs: 40, ..Default::default() };
    let a = generate_synthetic(&spec).unwrap();
    let b = generate_synthetic(&spec).unwrap();
    assert_eq!(a.offers, b.offers);
    assert_eq!(a.offer_embeddings.as_flat(), b.offer_embeddings.as_flat());
    let c = generate_synthetic(&GenSpec { seed: spec.seed + 1, ..spec }).unwrap();
    assert_ne!(a.offer_embeddings.as_flat(), c.offer_embeddings.as_flat());
}

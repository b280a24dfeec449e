use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::PipelineError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitItem {
    pub id: String,
    pub artist: String,
}

impl SplitItem {
    pub fn new(id: impl Into<String>, artist: impl Into<String>) -> Self {
        SplitItem {
            id: id.into(),
            artist: artist.into(),
        }
    }
}

/// Splits items into `(train, test)` ids so that no artist appears on both
/// sides. Artist groups are visited in seeded random order and added to the
/// test side whenever that brings its size closer to `test_fraction` of the
/// total; both sides always end up non-empty. Ids keep their input order.
pub fn artist_filter_split(
    items: &[SplitItem],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<String>, Vec<String>), PipelineError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(PipelineError::Split(format!("test_fraction {test_fraction} outside (0, 1)")));
    }
    let mut groups: BTreeMap<&str, usize> = BTreeMap::new();
    for it in items {
        *groups.entry(it.artist.as_str()).or_default() += 1;
    }
    if groups.len() < 2 {
        return Err(PipelineError::Split(format!(
            "need at least two artists, found {}",
            groups.len()
        )));
    }
    let mut order: Vec<(&str, usize)> = groups.into_iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let target = test_fraction * items.len() as f64;
    let mut test_artists = HashSet::new();
    let mut size = 0usize;
    for &(artist, n) in &order {
        if ((size + n) as f64 - target).abs() < (size as f64 - target).abs() {
            test_artists.insert(artist);
            size += n;
        }
    }
    if test_artists.is_empty() {
        test_artists.insert(order[0].0);
    } else if test_artists.len() == order.len() {
        test_artists.remove(order[order.len() - 1].0);
    }

    let (test, train): (Vec<&SplitItem>, Vec<&SplitItem>) =
        items.iter().partition(|it| test_artists.contains(it.artist.as_str()));
    let ids = |v: Vec<&SplitItem>| v.into_iter().map(|it| it.id.clone()).collect();
    Ok((ids(train), ids(test)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(artists: usize, per: usize) -> Vec<SplitItem> {
        (0..artists * per)
            .map(|i| SplitItem::new(format!("song{i}"), format!("artist{}", i % artists)))
            .collect()
    }

    #[test]
    fn four_equal_artists_quarter_split() {
        let items = corpus(4, 5);
        for seed in 0..20 {
            let (train, test) = artist_filter_split(&items, 0.25, seed).unwrap();
            assert_eq!(test.len(), 5);
            assert_eq!(train.len(), 15);
            let artists: HashSet<_> = items.iter().filter(|i| test.contains(&i.id)).map(|i| &i.artist).collect();
            assert_eq!(artists.len(), 1);
        }
    }

    #[test]
    fn artists_never_straddle() {
        let items: Vec<SplitItem> = (0..57)
            .map(|i| SplitItem::new(format!("s{i}"), format!("a{}", (i * 7) % 11 + i % 3)))
            .collect();
        for seed in 0..100 {
            let (train, test) = artist_filter_split(&items, 0.3, seed).unwrap();
            assert!(!train.is_empty() && !test.is_empty());
            assert_eq!(train.len() + test.len(), items.len());
            let artist = |id: &String| &items.iter().find(|i| &i.id == id).unwrap().artist;
            let train_artists: HashSet<_> = train.iter().map(artist).collect();
            assert!(test.iter().all(|id| !train_artists.contains(artist(id))));
        }
        assert_eq!(
            artist_filter_split(&items, 0.3, 5).unwrap(),
            artist_filter_split(&items, 0.3, 5).unwrap()
        );
    }

    #[test]
    fn single_artist_is_an_error() {
        let items = corpus(1, 6);
        assert!(matches!(artist_filter_split(&items, 0.5, 0), Err(PipelineError::Split(_))));
        assert!(artist_filter_split(&corpus(3, 2), 1.0, 0).is_err());
    }
}

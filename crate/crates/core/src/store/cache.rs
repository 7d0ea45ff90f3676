//! Expert cache with LIFO, LFU, and LRU replacement.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::placement::ExpertKey;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CachePolicy {
    /// Evicts the most recently inserted entry.
    Lifo,
    /// Evicts the least frequently used entry, oldest insertion first on ties.
    Lfu,
    /// Evicts the least recently used entry.
    Lru,
}

impl CachePolicy {
    pub const ALL: [CachePolicy; 3] = [CachePolicy::Lifo, CachePolicy::Lfu, CachePolicy::Lru];

    pub fn name(self) -> &'static str {
        match self {
            CachePolicy::Lifo => "lifo",
            CachePolicy::Lfu => "lfu",
            CachePolicy::Lru => "lru",
        }
    }
}

impl fmt::Display for CachePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CachePolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lifo" => Ok(CachePolicy::Lifo),
            "lfu" => Ok(CachePolicy::Lfu),
            "lru" => Ok(CachePolicy::Lru),
            other => Err(Error::InvalidConfig(format!("unknown cache policy '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CacheConfig {
    pub policy: CachePolicy,
    /// Share of all expert bytes the cache may hold, in `[0, 1]`.
    pub capacity_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Entry {
    bytes: u64,
    insert_seq: u64,
    freq: u64,
    last_use: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CacheOutcome {
    Hit,
    Miss { evicted: Vec<ExpertKey> },
}

impl CacheOutcome {
    pub fn is_hit(&self) -> bool {
        matches!(self, CacheOutcome::Hit)
    }
}

#[derive(Debug, Clone)]
pub struct ExpertCache {
    policy: CachePolicy,
    capacity_bytes: u64,
    occupied: u64,
    next_insert: u64,
    entries: BTreeMap<ExpertKey, Entry>,
    hits: u64,
    misses: u64,
}

impl ExpertCache {
    pub fn new(policy: CachePolicy, capacity_bytes: u64) -> Self {
        ExpertCache {
            policy,
            capacity_bytes,
            occupied: 0,
            next_insert: 0,
            entries: BTreeMap::new(),
            hits: 0,
            misses: 0,
        }
    }

    /// Sized as `capacity_fraction` of `total_expert_bytes`, rounded down.
    pub fn from_config(config: &CacheConfig, total_expert_bytes: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&config.capacity_fraction) {
            return Err(Error::InvalidConfig(format!(
                "cache fraction {} outside [0, 1]",
                config.capacity_fraction
            )));
        }
        let bytes = (config.capacity_fraction * total_expert_bytes as f64).floor() as u64;
        Ok(ExpertCache::new(config.policy, bytes))
    }

    pub fn policy(&self) -> CachePolicy {
        self.policy
    }

    pub fn capacity_bytes(&self) -> u64 {
        self.capacity_bytes
    }

    pub fn occupied_bytes(&self) -> u64 {
        self.occupied
    }

    pub fn contains(&self, key: ExpertKey) -> bool {
        self.entries.contains_key(&key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    pub fn misses(&self) -> u64 {
        self.misses
    }

    pub fn hit_rate(&self) -> Option<f64> {
        let total = self.hits + self.misses;
        (total > 0).then(|| self.hits as f64 / total as f64)
    }

    /// Looks up `key` at logical time `now_seq`, inserting it on a miss.
    ///
    /// An entry larger than the whole cache bypasses it and is never stored.
    pub fn access(&mut self, key: ExpertKey, bytes: u64, now_seq: u64) -> CacheOutcome {
        if let Some(e) = self.entries.get_mut(&key) {
            e.freq += 1;
            e.last_use = now_seq;
            self.hits += 1;
            return CacheOutcome::Hit;
        }
        self.misses += 1;
        let mut evicted = Vec::new();
        if bytes > self.capacity_bytes {
            return CacheOutcome::Miss { evicted };
        }
        while self.occupied + bytes > self.capacity_bytes {
            let victim = self.victim().expect("occupied bytes imply at least one entry");
            let e = self.entries.remove(&victim).expect("victim is present");
            self.occupied -= e.bytes;
            evicted.push(victim);
        }
        let insert_seq = self.next_insert;
        self.next_insert += 1;
        self.entries.insert(key, Entry { bytes, insert_seq, freq: 1, last_use: now_seq });
        self.occupied += bytes;
        CacheOutcome::Miss { evicted }
    }

    fn victim(&self) -> Option<ExpertKey> {
        let it = self.entries.iter();
        let pick = match self.policy {
            CachePolicy::Lifo => it.max_by_key(|(_, e)| e.insert_seq),
            CachePolicy::Lfu => it.min_by_key(|(_, e)| (e.freq, e.insert_seq)),
            CachePolicy::Lru => it.min_by_key(|(_, e)| (e.last_use, e.insert_seq)),
        };
        pick.map(|(k, _)| *k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(e: usize) -> ExpertKey {
        ExpertKey { block: 0, expert: e }
    }

    #[test]
    fn zero_capacity_never_stores() {
        let cfg = CacheConfig { policy: CachePolicy::Lru, capacity_fraction: 0.0 };
        let mut c = ExpertCache::from_config(&cfg, 1000).unwrap();
        for i in 0..20 {
            assert_eq!(c.access(k(i % 3), 10, i as u64), CacheOutcome::Miss { evicted: vec![] });
        }
        assert!(c.is_empty());
        assert_eq!(c.hit_rate(), Some(0.0));
    }

    #[test]
    fn lru_textbook() {
        let mut c = ExpertCache::new(CachePolicy::Lru, 20);
        c.access(k(0), 10, 0);
        c.access(k(1), 10, 1);
        assert!(c.access(k(0), 10, 2).is_hit());
        assert_eq!(c.access(k(2), 10, 3), CacheOutcome::Miss { evicted: vec![k(1)] });
    }

    #[test]
    fn lifo_evicts_newest() {
        let mut c = ExpertCache::new(CachePolicy::Lifo, 20);
        c.access(k(0), 10, 0);
        c.access(k(1), 10, 1);
        c.access(k(0), 10, 2);
        assert_eq!(c.access(k(2), 10, 3), CacheOutcome::Miss { evicted: vec![k(1)] });
        assert_eq!(c.access(k(3), 10, 4), CacheOutcome::Miss { evicted: vec![k(2)] });
    }

    #[test]
    fn lfu_evicts_coldest_then_oldest() {
        let mut c = ExpertCache::new(CachePolicy::Lfu, 30);
        c.access(k(0), 10, 0);
        c.access(k(1), 10, 1);
        c.access(k(2), 10, 2);
        c.access(k(0), 10, 3);
        c.access(k(2), 10, 4);
        assert_eq!(c.access(k(3), 10, 5), CacheOutcome::Miss { evicted: vec![k(1)] });
        // 0 and 2 have freq 2, 3 has freq 1.
        assert_eq!(c.access(k(4), 10, 6), CacheOutcome::Miss { evicted: vec![k(3)] });
    }

    #[test]
    fn oversize_entry_bypasses() {
        let mut c = ExpertCache::new(CachePolicy::Lru, 15);
        c.access(k(0), 10, 0);
        assert_eq!(c.access(k(1), 16, 1), CacheOutcome::Miss { evicted: vec![] });
        assert!(c.contains(k(0)));
        assert!(!c.contains(k(1)));
    }

    #[test]
    fn fraction_validation() {
        let bad = CacheConfig { policy: CachePolicy::Lfu, capacity_fraction: 1.5 };
        assert!(ExpertCache::from_config(&bad, 10).is_err());
        assert_eq!("LRU".parse::<CachePolicy>().unwrap(), CachePolicy::Lru);
        assert!("fifo".parse::<CachePolicy>().is_err());
    }
}

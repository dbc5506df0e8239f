//! Implicit-feedback interaction store.
//!
//! Interactions are a set of (user, item) pairs. Raw identifiers are mapped
//! to dense indices in first-appearance order. After a leave-one-out split
//! each eligible user has one validation and one test item removed from
//! the training lists.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{fork, Stream};

/// Which entity anchors a ranking list: a user ranking items, or an item
/// ranking users.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum Side {
    User,
    Item,
}

impl Side {
    pub fn flip(self) -> Side {
        match self {
            Side::User => Side::Item,
            Side::Item => Side::User,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::User => "user",
            Side::Item => "item",
        }
    }
}

/// Held-out portion of a split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Holdout {
    Valid,
    Test,
}

/// Bidirectional raw-id <-> dense-index map.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    raw: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_insert(&mut self, raw: &str) -> usize {
        if let Some(&idx) = self.index.get(raw) {
            return idx;
        }
        let idx = self.raw.len();
        self.raw.push(raw.to_string());
        self.index.insert(raw.to_string(), idx);
        idx
    }

    pub fn index_of(&self, raw: &str) -> Option<usize> {
        self.index.get(raw).copied()
    }

    pub fn raw(&self, idx: usize) -> Option<&str> {
        self.raw.get(idx).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    /// Raw ids in index order.
    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.raw.iter().map(String::as_str)
    }
}

/// Accumulates raw interaction records, deduplicating repeated pairs.
#[derive(Debug, Default)]
pub struct DatasetBuilder {
    users: IdMap,
    items: IdMap,
    by_user: Vec<BTreeSet<usize>>,
    records: usize,
    duplicates: usize,
}

impl DatasetBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one record; returns `false` if the pair was already present.
    pub fn push(&mut self, user: &str, item: &str) -> bool {
        self.records += 1;
        let u = self.users.get_or_insert(user);
        let i = self.items.get_or_insert(item);
        if u == self.by_user.len() {
            self.by_user.push(BTreeSet::new());
        }
        let fresh = self.by_user[u].insert(i);
        if !fresh {
            self.duplicates += 1;
        }
        fresh
    }

    pub fn records(&self) -> usize {
        self.records
    }

    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    pub fn build(self) -> Result<InteractionDataset> {
        if self.records == 0 {
            return Err(Error::EmptyInput("no interaction records"));
        }
        let train: Vec<Vec<usize>> = self.by_user.into_iter().map(|s| s.into_iter().collect()).collect();
        let num_users = self.users.len();
        let num_items = self.items.len();
        Ok(InteractionDataset::assemble(
            num_users,
            num_items,
            train,
            alloc::vec![None; num_users],
            alloc::vec![None; num_users],
            self.users,
            self.items,
        ))
    }
}

/// One user's held-out pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitAssignment {
    pub user: usize,
    pub valid: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionDataset {
    num_users: usize,
    num_items: usize,
    train: Vec<Vec<usize>>,
    train_by_item: Vec<Vec<usize>>,
    valid: Vec<Option<usize>>,
    test: Vec<Option<usize>>,
    user_ids: IdMap,
    item_ids: IdMap,
}

impl InteractionDataset {
    fn assemble(
        num_users: usize,
        num_items: usize,
        train: Vec<Vec<usize>>,
        valid: Vec<Option<usize>>,
        test: Vec<Option<usize>>,
        user_ids: IdMap,
        item_ids: IdMap,
    ) -> Self {
        let mut train_by_item = alloc::vec![Vec::new(); num_items];
        // users are visited in ascending order, so each item list comes out sorted
        for (u, items) in train.iter().enumerate() {
            for &i in items {
                train_by_item[i].push(u);
            }
        }
        Self { num_users, num_items, train, train_by_item, valid, test, user_ids, item_ids }
    }

    /// Builds an unsplit dataset straight from dense index pairs. Raw ids are
    /// the decimal indices. Every index below the given counts exists even if
    /// it has no interactions.
    pub fn from_index_pairs(num_users: usize, num_items: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptyInput("no interaction records"));
        }
        let mut by_user = alloc::vec![BTreeSet::new(); num_users];
        for &(u, i) in pairs {
            if u >= num_users {
                return Err(Error::IdOutOfRange { kind: "user", id: u, count: num_users });
            }
            if i >= num_items {
                return Err(Error::IdOutOfRange { kind: "item", id: i, count: num_items });
            }
            by_user[u].insert(i);
        }
        let mut user_ids = IdMap::new();
        for u in 0..num_users {
            user_ids.get_or_insert(&u.to_string());
        }
        let mut item_ids = IdMap::new();
        for i in 0..num_items {
            item_ids.get_or_insert(&i.to_string());
        }
        let train = by_user.into_iter().map(|s| s.into_iter().collect()).collect();
        Ok(Self::assemble(
            num_users,
            num_items,
            train,
            alloc::vec![None; num_users],
            alloc::vec![None; num_users],
            user_ids,
            item_ids,
        ))
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    /// Number of anchors on `side` (users for the user side).
    pub fn num_anchors(&self, side: Side) -> usize {
        match side {
            Side::User => self.num_users,
            Side::Item => self.num_items,
        }
    }

    /// Number of candidates an anchor on `side` ranks.
    pub fn num_counterparts(&self, side: Side) -> usize {
        self.num_anchors(side.flip())
    }

    /// All interactions, held-out ones included.
    pub fn num_interactions(&self) -> usize {
        self.num_train() + self.valid.iter().flatten().count() + self.test.iter().flatten().count()
    }

    pub fn num_train(&self) -> usize {
        self.train.iter().map(Vec::len).sum()
    }

    pub fn user_ids(&self) -> &IdMap {
        &self.user_ids
    }

    pub fn item_ids(&self) -> &IdMap {
        &self.item_ids
    }

    pub fn ids(&self, side: Side) -> &IdMap {
        match side {
            Side::User => &self.user_ids,
            Side::Item => &self.item_ids,
        }
    }

    /// Sorted training items of `user`.
    pub fn train_items(&self, user: usize) -> &[usize] {
        &self.train[user]
    }

    /// Sorted training users of `item`.
    pub fn train_users(&self, item: usize) -> &[usize] {
        &self.train_by_item[item]
    }

    /// Sorted training counterparts of an anchor.
    pub fn train_counterparts(&self, side: Side, anchor: usize) -> &[usize] {
        match side {
            Side::User => self.train_items(anchor),
            Side::Item => self.train_users(anchor),
        }
    }

    pub fn valid_item(&self, user: usize) -> Option<usize> {
        self.valid[user]
    }

    pub fn test_item(&self, user: usize) -> Option<usize> {
        self.test[user]
    }

    pub fn held_out(&self, user: usize, which: Holdout) -> Option<usize> {
        match which {
            Holdout::Valid => self.valid[user],
            Holdout::Test => self.test[user],
        }
    }

    /// Repeatedly drops users with fewer than `min_user` interactions and
    /// items with fewer than `min_item` until both thresholds hold (a k-core).
    /// Survivors are re-indexed densely in their original order with raw ids
    /// kept. Only unsplit data can be filtered.
    pub fn min_count_filter(&self, min_user: usize, min_item: usize) -> Result<Self> {
        if self.is_split() {
            return Err(Error::InvalidSplit("filter before splitting".into()));
        }
        let mut user_alive = alloc::vec![true; self.num_users];
        let mut item_alive = alloc::vec![true; self.num_items];
        loop {
            let mut changed = false;
            let mut item_deg = alloc::vec![0usize; self.num_items];
            for u in 0..self.num_users {
                if !user_alive[u] {
                    continue;
                }
                let deg = self.train[u].iter().filter(|&&i| item_alive[i]).count();
                if deg < min_user {
                    user_alive[u] = false;
                    changed = true;
                } else {
                    self.train[u].iter().filter(|&&i| item_alive[i]).for_each(|&i| item_deg[i] += 1);
                }
            }
            for i in 0..self.num_items {
                if item_alive[i] && item_deg[i] < min_item {
                    item_alive[i] = false;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        let mut builder = DatasetBuilder::new();
        for u in (0..self.num_users).filter(|&u| user_alive[u]) {
            for &i in self.train[u].iter().filter(|&&i| item_alive[i]) {
                builder.push(self.user_ids.raw(u).unwrap_or_default(), self.item_ids.raw(i).unwrap_or_default());
            }
        }
        builder.build()
    }

    pub fn is_split(&self) -> bool {
        self.test.iter().any(Option::is_some)
    }

    pub fn is_train(&self, user: usize, item: usize) -> bool {
        self.train[user].binary_search(&item).is_ok()
    }

    /// Train, validation or test interaction.
    pub fn is_observed(&self, user: usize, item: usize) -> bool {
        self.is_train(user, item) || self.valid[user] == Some(item) || self.test[user] == Some(item)
    }

    fn is_observed_side(&self, side: Side, anchor: usize, candidate: usize) -> bool {
        match side {
            Side::User => self.is_observed(anchor, candidate),
            Side::Item => self.is_observed(candidate, anchor),
        }
    }

    /// Counterparts an anchor has not interacted with in training, ascending.
    pub fn unobserved_counterparts(&self, side: Side, anchor: usize) -> Vec<usize> {
        let observed = self.train_counterparts(side, anchor);
        let mut next = observed.iter().peekable();
        (0..self.num_counterparts(side))
            .filter(|c| {
                if next.peek() == Some(&c) {
                    next.next();
                    false
                } else {
                    true
                }
            })
            .collect()
    }

    /// Every interaction of `user` (train and held out), sorted.
    pub fn all_items(&self, user: usize) -> Vec<usize> {
        let mut all = self.train[user].clone();
        all.extend(self.valid[user]);
        all.extend(self.test[user]);
        all.sort_unstable();
        all
    }

    /// Users with a held-out item in `which`, paired with that item.
    pub fn held_out_pairs(&self, which: Holdout) -> impl Iterator<Item = (usize, usize)> + '_ {
        let col = match which {
            Holdout::Valid => &self.valid,
            Holdout::Test => &self.test,
        };
        col.iter().enumerate().filter_map(|(u, i)| i.map(|i| (u, i)))
    }

    pub fn split_assignments(&self) -> Vec<SplitAssignment> {
        (0..self.num_users)
            .filter_map(|u| match (self.valid[u], self.test[u]) {
                (Some(valid), Some(test)) => Some(SplitAssignment { user: u, valid, test }),
                _ => None,
            })
            .collect()
    }

    /// Leave-one-out split: every user with at least `min_interactions`
    /// interactions gets one uniformly chosen test item and one validation
    /// item. Any previous split is undone first, so the result depends only
    /// on the interaction set and `seed`.
    pub fn leave_one_out_split(&self, seed: u64, min_interactions: usize) -> Result<Self> {
        if min_interactions < 3 {
            return Err(Error::InvalidConfig(alloc::format!(
                "min_interactions must be at least 3, got {min_interactions}"
            )));
        }
        let mut rng = fork(seed, Stream::Split);
        let mut assignments = Vec::new();
        for u in 0..self.num_users {
            let all = self.all_items(u);
            if all.len() < min_interactions {
                continue;
            }
            let picked = index::sample(&mut rng, all.len(), 2);
            assignments.push(SplitAssignment { user: u, test: all[picked.index(0)], valid: all[picked.index(1)] });
        }
        self.with_split(&assignments)
    }

    /// Applies an explicit split (e.g. one read back from a sidecar file).
    pub fn with_split(&self, assignments: &[SplitAssignment]) -> Result<Self> {
        let mut train: Vec<Vec<usize>> = (0..self.num_users).map(|u| self.all_items(u)).collect();
        let mut valid = alloc::vec![None; self.num_users];
        let mut test = alloc::vec![None; self.num_users];
        for a in assignments {
            if a.user >= self.num_users {
                return Err(Error::IdOutOfRange { kind: "user", id: a.user, count: self.num_users });
            }
            if a.valid == a.test {
                return Err(Error::InvalidSplit(alloc::format!("user {} has identical valid and test item", a.user)));
            }
            if valid[a.user].is_some() {
                return Err(Error::InvalidSplit(alloc::format!("user {} assigned twice", a.user)));
            }
            let items = &mut train[a.user];
            for held in [a.valid, a.test] {
                match items.binary_search(&held) {
                    Ok(pos) => {
                        items.remove(pos);
                    }
                    Err(_) => {
                        return Err(Error::InvalidSplit(alloc::format!(
                            "item {held} is not an interaction of user {}",
                            a.user
                        )))
                    }
                }
            }
            valid[a.user] = Some(a.valid);
            test[a.user] = Some(a.test);
        }
        Ok(Self::assemble(
            self.num_users,
            self.num_items,
            train,
            valid,
            test,
            self.user_ids.clone(),
            self.item_ids.clone(),
        ))
    }

    /// `n` items drawn uniformly (with replacement) from those the user has
    /// never interacted with, held-out items included.
    pub fn sample_negatives<R: Rng + ?Sized>(&self, user: usize, n: usize, rng: &mut R) -> Result<Vec<usize>> {
        self.sample_negatives_side(Side::User, user, n, rng)
    }

    /// Side-generic negative sampling: for the item side the negatives are
    /// users that never interacted with the item.
    pub fn sample_negatives_side<R: Rng + ?Sized>(
        &self,
        side: Side,
        anchor: usize,
        n: usize,
        rng: &mut R,
    ) -> Result<Vec<usize>> {
        let anchors = self.num_anchors(side);
        if anchor >= anchors {
            return Err(Error::IdOutOfRange { kind: side.as_str(), id: anchor, count: anchors });
        }
        let total = self.num_counterparts(side);
        let observed = match side {
            Side::User => self.all_items(anchor).len(),
            Side::Item => {
                self.train_by_item[anchor].len()
                    + self.valid.iter().filter(|v| **v == Some(anchor)).count()
                    + self.test.iter().filter(|t| **t == Some(anchor)).count()
            }
        };
        if observed >= total {
            return Err(Error::NoNegatives { user: anchor });
        }
        let mut out = Vec::with_capacity(n);
        if observed * 2 <= total {
            while out.len() < n {
                let c = rng.gen_range(0..total);
                if !self.is_observed_side(side, anchor, c) {
                    out.push(c);
                }
            }
        } else {
            let candidates: Vec<usize> = (0..total).filter(|&c| !self.is_observed_side(side, anchor, c)).collect();
            for _ in 0..n {
                out.push(candidates[rng.gen_range(0..candidates.len())]);
            }
        }
        Ok(out)
    }

    /// User-anchored training batch: every training item of each user is a
    /// positive, with `neg_ratio` sampled negatives per positive.
    pub fn user_batch<R: Rng + ?Sized>(&self, users: &[usize], neg_ratio: usize, rng: &mut R) -> Result<Batch> {
        self.batch(Side::User, users, neg_ratio, rng)
    }

    pub fn batch<R: Rng + ?Sized>(
        &self,
        side: Side,
        anchors: &[usize],
        neg_ratio: usize,
        rng: &mut R,
    ) -> Result<Batch> {
        let mut positives = Vec::with_capacity(anchors.len());
        let mut negatives = Vec::with_capacity(anchors.len());
        for &a in anchors {
            let pos = self.train_counterparts(side, a).to_vec();
            let neg = self.sample_negatives_side(side, a, pos.len() * neg_ratio, rng)?;
            positives.push(pos);
            negatives.push(neg);
        }
        Ok(Batch { side, anchors: anchors.to_vec(), positives, negatives })
    }
}

/// Anchors with their positives and sampled negatives. For anchor `k`,
/// positive `j` is paired with negatives `j*r .. (j+1)*r` where
/// `r = negatives[k].len() / positives[k].len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub side: Side,
    pub anchors: Vec<usize>,
    pub positives: Vec<Vec<usize>>,
    pub negatives: Vec<Vec<usize>>,
}

impl Batch {
    pub fn is_empty(&self) -> bool {
        self.positives.iter().all(Vec::is_empty)
    }

    /// Distinct positive counterparts across the batch, ascending.
    pub fn distinct_positives(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self.positives.iter().flatten().copied().collect();
        set.into_iter().collect()
    }
}

use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NullingSide {
    TxNulls,
    RxNulls,
    Unassigned,
}

impl NullingSide {
    pub fn token(self) -> &'static str {
        match self {
            NullingSide::TxNulls => "tx",
            NullingSide::RxNulls => "rx",
            NullingSide::Unassigned => "none",
        }
    }

    pub fn from_token(t: &str) -> Option<Self> {
        match t {
            "tx" => Some(NullingSide::TxNulls),
            "rx" => Some(NullingSide::RxNulls),
            "none" => Some(NullingSide::Unassigned),
            _ => None,
        }
    }
}

/// Which end cancels each ordered cross link `i → j` (`i ≠ j`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NullingAssignment {
    users: usize,
    capacity: usize,
    links: BTreeMap<(usize, usize), NullingSide>,
}

/// Links each transmitter or receiver can cancel with `antennas` full
/// polarimetric antennas: a link channel has rank 2, the node space has
/// dimension `6M`, and two dimensions are kept for the user's own streams.
pub fn nulling_capacity(antennas: usize) -> usize {
    (3 * antennas).saturating_sub(1)
}

/// Capacity for a node space of dimension `node_dim` when each cancelled
/// link costs `link_rank` dimensions and `streams` dimensions must remain.
pub fn nulling_capacity_for(node_dim: usize, link_rank: usize, streams: usize) -> usize {
    if link_rank == 0 {
        return usize::MAX;
    }
    node_dim.saturating_sub(streams) / link_rank
}

pub fn assign_nulling(users: usize, antennas: usize) -> NullingAssignment {
    assign_with_capacity(users, nulling_capacity(antennas))
}

/// Cyclic rule: transmitter `i` cancels its links to receivers
/// `i+1, …, i+⌈(K−1)/2⌉ (mod K)` and receivers cancel the rest. Links
/// whose preferred end is full go to the other end if it has room; links
/// with both ends full stay unassigned.
pub fn assign_with_capacity(users: usize, capacity: usize) -> NullingAssignment {
    let mut a = NullingAssignment {
        users,
        capacity,
        links: BTreeMap::new(),
    };
    if users < 2 {
        return a;
    }
    let tx_share = users / 2; // ⌈(K−1)/2⌉
    let mut tx_load = vec![0usize; users];
    let mut rx_load = vec![0usize; users];
    let mut pending = Vec::new();

    for i in 0..users {
        for d in 1..users {
            let j = (i + d) % users;
            let side = if d <= tx_share {
                if tx_load[i] < capacity {
                    tx_load[i] += 1;
                    NullingSide::TxNulls
                } else {
                    pending.push((i, j));
                    NullingSide::Unassigned
                }
            } else if rx_load[j] < capacity {
                rx_load[j] += 1;
                NullingSide::RxNulls
            } else {
                pending.push((i, j));
                NullingSide::Unassigned
            };
            a.links.insert((i, j), side);
        }
    }

    // greedy fallback by residual capacity
    for (i, j) in pending {
        let tx_room = capacity - tx_load[i];
        let rx_room = capacity - rx_load[j];
        let side = if tx_room == 0 && rx_room == 0 {
            continue;
        } else if tx_room >= rx_room {
            tx_load[i] += 1;
            NullingSide::TxNulls
        } else {
            rx_load[j] += 1;
            NullingSide::RxNulls
        };
        a.links.insert((i, j), side);
    }
    a
}

impl NullingAssignment {
    /// Builds an assignment from explicit per-link sides; links not listed are unassigned.
    pub fn from_links(
        users: usize,
        capacity: usize,
        links: impl IntoIterator<Item = ((usize, usize), NullingSide)>,
    ) -> Self {
        let mut map: BTreeMap<_, _> = (0..users)
            .flat_map(|i| {
                (0..users)
                    .filter(move |&j| j != i)
                    .map(move |j| ((i, j), NullingSide::Unassigned))
            })
            .collect();
        for (k, v) in links {
            if k.0 != k.1 && k.0 < users && k.1 < users {
                map.insert(k, v);
            }
        }
        Self {
            users,
            capacity,
            links: map,
        }
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn side(&self, tx: usize, rx: usize) -> NullingSide {
        self.links
            .get(&(tx, rx))
            .copied()
            .unwrap_or(NullingSide::Unassigned)
    }

    pub fn links(&self) -> impl Iterator<Item = ((usize, usize), NullingSide)> + '_ {
        self.links.iter().map(|(&k, &v)| (k, v))
    }

    /// Receivers whose link from transmitter `tx` the transmitter cancels.
    pub fn tx_nulls(&self, tx: usize) -> Vec<usize> {
        self.links
            .iter()
            .filter(|(&(i, _), &s)| i == tx && s == NullingSide::TxNulls)
            .map(|(&(_, j), _)| j)
            .collect()
    }

    /// Transmitters whose link into receiver `rx` the receiver cancels.
    pub fn rx_nulls(&self, rx: usize) -> Vec<usize> {
        self.links
            .iter()
            .filter(|(&(_, j), &s)| j == rx && s == NullingSide::RxNulls)
            .map(|(&(i, _), _)| i)
            .collect()
    }

    pub fn tx_load(&self, tx: usize) -> usize {
        self.tx_nulls(tx).len()
    }

    pub fn rx_load(&self, rx: usize) -> usize {
        self.rx_nulls(rx).len()
    }

    pub fn unassigned(&self) -> Vec<(usize, usize)> {
        self.links
            .iter()
            .filter(|(_, &s)| s == NullingSide::Unassigned)
            .map(|(&k, _)| k)
            .collect()
    }

    pub fn is_complete(&self) -> bool {
        self.links.values().all(|&s| s != NullingSide::Unassigned)
    }

    pub fn respects_capacity(&self) -> bool {
        (0..self.users)
            .all(|n| self.tx_load(n) <= self.capacity && self.rx_load(n) <= self.capacity)
    }
}

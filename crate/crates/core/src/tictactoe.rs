//! Board games on an `n × n` grid: exhaustive game enumeration and
//! canonicalization under the eight rotations and reflections of the board.
//!
//! Cells are numbered row-major from 1:
//!
//! ```text
//! 1 | 2 | 3
//! 4 | 5 | 6
//! 7 | 8 | 9
//! ```

use std::collections::HashSet;

use num_bigint::BigUint;
use serde::Serialize;
use thiserror::Error;

/// Largest number of complete games `enumerate_games` will produce.
pub const ENUMERATION_BUDGET: usize = 1_000_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GameError {
    #[error("board size must be at least 1")]
    EmptyBoard,
    #[error("cell {0} is not on the board")]
    OffBoard(u8),
    #[error("cell {0} is already taken")]
    Occupied(u8),
    #[error("move {0} is played after the game is over")]
    AfterGameOver(usize),
    #[error("enumeration budget exceeded ({0} games)")]
    BudgetExceeded(usize),
}

/// The eight symmetries of the square as maps on 1-based cell numbers.
pub fn symmetries(n: usize) -> Vec<Vec<u8>> {
    let map = |f: &dyn Fn(usize, usize) -> (usize, usize)| -> Vec<u8> {
        (0..n * n)
            .map(|cell| {
                let (r, c) = f(cell / n, cell % n);
                (r * n + c + 1) as u8
            })
            .collect()
    };
    let m = n - 1;
    vec![
        map(&|r, c| (r, c)),
        map(&|r, c| (c, m - r)),
        map(&|r, c| (m - r, m - c)),
        map(&|r, c| (m - c, r)),
        map(&|r, c| (r, m - c)),
        map(&|r, c| (m - r, c)),
        map(&|r, c| (c, r)),
        map(&|r, c| (m - c, m - r)),
    ]
}

fn lines(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for i in 0..n {
        out.push((0..n).map(|j| i * n + j).collect());
        out.push((0..n).map(|j| j * n + i).collect());
    }
    out.push((0..n).map(|i| i * n + i).collect());
    out.push((0..n).map(|i| i * n + (n - 1 - i)).collect());
    out
}

struct Board {
    n: usize,
    cells: Vec<u8>, // 0 empty, 1 first player, 2 second player
    lines: Vec<Vec<usize>>,
}

impl Board {
    fn new(n: usize) -> Self {
        Board {
            n,
            cells: vec![0; n * n],
            lines: lines(n),
        }
    }

    fn wins(&self, cell: usize) -> bool {
        let who = self.cells[cell];
        self.lines
            .iter()
            .filter(|l| l.contains(&cell))
            .any(|l| l.iter().all(|&c| self.cells[c] == who))
    }
}

/// Checks that `play` is a legal game prefix; returns whether it is a
/// complete game (ended by a win or a full board).
pub fn validate(play: &[u8], n: usize) -> Result<bool, GameError> {
    if n == 0 {
        return Err(GameError::EmptyBoard);
    }
    let mut board = Board::new(n);
    let mut over = false;
    for (i, &cell) in play.iter().enumerate() {
        if over {
            return Err(GameError::AfterGameOver(i + 1));
        }
        if cell == 0 || cell as usize > n * n {
            return Err(GameError::OffBoard(cell));
        }
        let idx = cell as usize - 1;
        if board.cells[idx] != 0 {
            return Err(GameError::Occupied(cell));
        }
        board.cells[idx] = (i % 2) as u8 + 1;
        over = board.wins(idx) || i + 1 == n * n;
    }
    Ok(over)
}

/// Canonical representative of the class of `play`.
///
/// Symmetries are applied move by move: two plays are equivalent when, after
/// every move, their boards are images of each other (possibly under a
/// different symmetry at each step). The representative is the
/// lexicographically least play in the class.
pub fn canonical(play: &[u8], n: usize) -> Result<Vec<u8>, GameError> {
    validate(play, n)?;
    Ok(canonical_unchecked(play, &symmetries(n)))
}

/// Least image of a board (marks per cell) under `syms`.
fn canonical_board(cells: &[u8], syms: &[Vec<u8>]) -> Vec<u8> {
    syms.iter()
        .map(|s| {
            let mut image = vec![0; cells.len()];
            for (i, &mark) in cells.iter().enumerate() {
                image[s[i] as usize - 1] = mark;
            }
            image
        })
        .min()
        .expect("eight symmetries")
}

fn canonical_unchecked(play: &[u8], syms: &[Vec<u8>]) -> Vec<u8> {
    let size = syms[0].len();
    let mut actual = vec![0u8; size];
    let mut rep = vec![0u8; size];
    let mut out = Vec::with_capacity(play.len());
    for (k, &cell) in play.iter().enumerate() {
        let mark = (k % 2) as u8 + 1;
        actual[cell as usize - 1] = mark;
        let target = canonical_board(&actual, syms);
        let choice = (0..size)
            .find(|&c| {
                if rep[c] != 0 {
                    return false;
                }
                rep[c] = mark;
                let hit = canonical_board(&rep, syms) == target;
                rep[c] = 0;
                hit
            })
            .expect("boards in one class are images of each other");
        rep[choice] = mark;
        out.push(choice as u8 + 1);
    }
    out
}

/// Every complete game on the `n × n` board, in depth-first order.
pub fn enumerate_games(n: usize) -> Result<Vec<Vec<u8>>, GameError> {
    if n == 0 {
        return Err(GameError::EmptyBoard);
    }
    let mut board = Board::new(n);
    let mut play = Vec::with_capacity(n * n);
    let mut games = Vec::new();
    extend(&mut board, &mut play, &mut games)?;
    Ok(games)
}

fn extend(
    board: &mut Board,
    play: &mut Vec<u8>,
    games: &mut Vec<Vec<u8>>,
) -> Result<(), GameError> {
    let total = board.n * board.n;
    for cell in 0..total {
        if board.cells[cell] != 0 {
            continue;
        }
        board.cells[cell] = (play.len() % 2) as u8 + 1;
        play.push(cell as u8 + 1);
        if board.wins(cell) || play.len() == total {
            if games.len() == ENUMERATION_BUDGET {
                return Err(GameError::BudgetExceeded(ENUMERATION_BUDGET));
            }
            games.push(play.clone());
        } else {
            extend(board, play, games)?;
        }
        play.pop();
        board.cells[cell] = 0;
    }
    Ok(())
}

/// Canonical representatives of all complete games, sorted.
pub fn game_classes(n: usize) -> Result<Vec<Vec<u8>>, GameError> {
    let syms = symmetries(n);
    let games = enumerate_games(n)?;
    let mut classes: Vec<Vec<u8>> = games
        .iter()
        .map(|g| canonical_unchecked(g, &syms))
        .collect::<HashSet<_>>()
        .into_iter()
        .collect();
    classes.sort();
    Ok(classes)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GameCounts {
    pub board: usize,
    pub games: usize,
    pub classes: usize,
    /// `(n²)!`, the number of unconstrained move orders.
    pub permutations: String,
    pub first_move_classes: usize,
}

pub fn game_counts(n: usize) -> Result<GameCounts, GameError> {
    let syms = symmetries(n);
    let games = enumerate_games(n)?;
    let classes: HashSet<Vec<u8>> = games
        .iter()
        .map(|g| canonical_unchecked(g, &syms))
        .collect();
    let first: HashSet<Vec<u8>> = (1..=(n * n) as u8)
        .map(|c| canonical_unchecked(&[c], &syms))
        .collect();
    let permutations: BigUint = (1..=(n * n) as u64).map(BigUint::from).product();
    Ok(GameCounts {
        board: n,
        games: games.len(),
        classes: classes.len(),
        permutations: permutations.to_string(),
        first_move_classes: first.len(),
    })
}

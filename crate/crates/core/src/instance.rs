//! Building world: grid, target structure, border ring and neighborhoods.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("malformed instance file: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("grid must be at least 3x3, got {x}x{y}")]
    GridTooSmall { x: usize, y: usize },
    #[error("grid dimension {0} exceeds the supported maximum of 255")]
    GridTooLarge(usize),
    #[error("z must be at least 1 (at least 2 when any target height is positive), got {0}")]
    TooFewLevels(usize),
    #[error("heightmap has {got} rows, expected {expected}")]
    RowCount { expected: usize, got: usize },
    #[error("heightmap row {row} has {got} entries, expected {expected}")]
    RowLength {
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("target height {height} at ({x}, {y}) exceeds z - 1 = {max}")]
    HeightTooLarge {
        x: usize,
        y: usize,
        height: usize,
        max: usize,
    },
    #[error("border target: cell ({x}, {y}) lies on the border ring and must stay empty, got height {height}")]
    BorderTarget { x: usize, y: usize, height: usize },
    #[error("agent_limit must be at least 1")]
    NoAgents,
}

/// Grid size: `x` by `y` columns, `z` traversable levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridDims {
    pub x: u8,
    pub y: u8,
    pub z: u8,
}

impl GridDims {
    pub fn columns(&self) -> usize {
        self.x as usize * self.y as usize
    }

    pub fn contains(&self, x: i32, y: i32) -> bool {
        x >= 0 && y >= 0 && x < self.x as i32 && y < self.y as i32
    }

    pub fn column_index(&self, x: u8, y: u8) -> usize {
        y as usize * self.x as usize + x as usize
    }

    pub fn is_border(&self, x: u8, y: u8) -> bool {
        x == 0 || y == 0 || x + 1 == self.x || y + 1 == self.y
    }

    /// All grid cells `(x, y, z)` in x-fastest, then y, then z order.
    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.z).flat_map(move |z| {
            (0..self.y).flat_map(move |y| (0..self.x).map(move |x| Cell { x, y, z }))
        })
    }

    pub fn neighbors(&self, x: u8, y: u8) -> Vec<(u8, u8)> {
        const OFFSETS: [(i32, i32); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];
        OFFSETS
            .iter()
            .map(|(dx, dy)| (x as i32 + dx, y as i32 + dy))
            .filter(|&(nx, ny)| self.contains(nx, ny))
            .map(|(nx, ny)| (nx as u8, ny as u8))
            .collect()
    }
}

/// A grid cell; `z` is the level the agent stands on (equal to the column height).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub x: u8,
    pub y: u8,
    pub z: u8,
}

impl Cell {
    pub fn new(x: u8, y: u8, z: u8) -> Self {
        Cell { x, y, z }
    }

    pub fn column(&self) -> (u8, u8) {
        (self.x, self.y)
    }
}

/// Agent-accessible position: a grid cell or one of the two off-grid sentinels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Position {
    Start,
    Cell(Cell),
    End,
}

impl Position {
    pub fn cell(&self) -> Option<Cell> {
        match self {
            Position::Cell(c) => Some(*c),
            _ => None,
        }
    }

    pub fn column(&self) -> Option<(u8, u8)> {
        self.cell().map(|c| c.column())
    }
}

impl From<Cell> for Position {
    fn from(c: Cell) -> Self {
        Position::Cell(c)
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Position::Start => write!(f, "(S,S,S)"),
            Position::End => write!(f, "(E,E,E)"),
            Position::Cell(c) => write!(f, "({},{},{})", c.x, c.y, c.z),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct InstanceFile {
    x: usize,
    y: usize,
    z: usize,
    agent_limit: u32,
    heightmap: Vec<Vec<usize>>,
}

/// A validated construction task.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Instance {
    pub dims: GridDims,
    /// Target heights, row-major (`y * X + x`).
    target: Vec<u8>,
    pub agent_limit: u32,
}

impl Instance {
    /// Builds an instance from a heightmap indexed `heightmap[y][x]`.
    pub fn new(
        x: usize,
        y: usize,
        z: usize,
        agent_limit: u32,
        heightmap: &[Vec<usize>],
    ) -> Result<Self, InstanceError> {
        if x < 3 || y < 3 {
            return Err(InstanceError::GridTooSmall { x, y });
        }
        for d in [x, y, z] {
            if d > 255 {
                return Err(InstanceError::GridTooLarge(d));
            }
        }
        if z < 1 {
            return Err(InstanceError::TooFewLevels(z));
        }
        if agent_limit == 0 {
            return Err(InstanceError::NoAgents);
        }
        if heightmap.len() != y {
            return Err(InstanceError::RowCount {
                expected: y,
                got: heightmap.len(),
            });
        }
        let dims = GridDims {
            x: x as u8,
            y: y as u8,
            z: z as u8,
        };
        let mut target = Vec::with_capacity(x * y);
        for (row_idx, row) in heightmap.iter().enumerate() {
            if row.len() != x {
                return Err(InstanceError::RowLength {
                    row: row_idx,
                    expected: x,
                    got: row.len(),
                });
            }
            for (col_idx, &h) in row.iter().enumerate() {
                if h > 0 && z < 2 {
                    return Err(InstanceError::TooFewLevels(z));
                }
                if h > z - 1 {
                    return Err(InstanceError::HeightTooLarge {
                        x: col_idx,
                        y: row_idx,
                        height: h,
                        max: z - 1,
                    });
                }
                if h > 0 && dims.is_border(col_idx as u8, row_idx as u8) {
                    return Err(InstanceError::BorderTarget {
                        x: col_idx,
                        y: row_idx,
                        height: h,
                    });
                }
                target.push(h as u8);
            }
        }
        Ok(Instance {
            dims,
            target,
            agent_limit,
        })
    }

    pub fn target(&self, x: u8, y: u8) -> u8 {
        self.target[self.dims.column_index(x, y)]
    }

    /// Target heights in row-major order.
    pub fn targets(&self) -> &[u8] {
        &self.target
    }

    pub fn total_blocks(&self) -> usize {
        self.target.iter().map(|&h| h as usize).sum()
    }

    pub fn heightmap(&self) -> Vec<Vec<usize>> {
        self.target
            .chunks(self.dims.x as usize)
            .map(|row| row.iter().map(|&h| h as usize).collect())
            .collect()
    }

    pub fn to_json(&self) -> String {
        let file = InstanceFile {
            x: self.dims.x as usize,
            y: self.dims.y as usize,
            z: self.dims.z as usize,
            agent_limit: self.agent_limit,
            heightmap: self.heightmap(),
        };
        serde_json::to_string_pretty(&file).expect("instance serializes")
    }

    pub fn border_cells(&self) -> Vec<Cell> {
        border_cells(&self.dims)
    }

    pub fn neighbors(&self, x: u8, y: u8) -> Vec<(u8, u8)> {
        self.dims.neighbors(x, y)
    }

    pub fn min_border_distance(&self, x: u8, y: u8) -> u32 {
        min_border_distance(&self.dims, x, y)
    }
}

/// Parses the JSON instance format
/// `{"x", "y", "z", "agent_limit", "heightmap": [[..], ..]}` with
/// `heightmap[y][x]` the target column height. Rows run north to south.
pub fn parse_instance(text: &str) -> Result<Instance, InstanceError> {
    let file: InstanceFile = serde_json::from_str(text)?;
    Instance::new(file.x, file.y, file.z, file.agent_limit, &file.heightmap)
}

/// Perimeter cells at ground level, in x-fastest row-major order.
pub fn border_cells(dims: &GridDims) -> Vec<Cell> {
    let mut cells = Vec::with_capacity(2 * dims.x as usize + 2 * dims.y as usize);
    for y in 0..dims.y {
        for x in 0..dims.x {
            if dims.is_border(x, y) {
                cells.push(Cell { x, y, z: 0 });
            }
        }
    }
    cells
}

/// Minimum L1 distance from any border cell to any 4-neighbor of `(x, y)`.
pub fn min_border_distance(dims: &GridDims, x: u8, y: u8) -> u32 {
    // Distance from a cell to the nearest ring cell is its distance to the
    // closest grid edge.
    let to_edge = |nx: u8, ny: u8| -> u32 {
        let dx = nx.min(dims.x - 1 - nx) as u32;
        let dy = ny.min(dims.y - 1 - ny) as u32;
        dx.min(dy)
    };
    dims.neighbors(x, y)
        .into_iter()
        .map(|(nx, ny)| to_edge(nx, ny))
        .min()
        .unwrap_or(0)
}

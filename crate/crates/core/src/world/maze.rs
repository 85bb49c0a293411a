use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::GridGeometry;
use crate::Pose2D;

pub const DEFAULT_RESOLUTION: f64 = 0.25;
pub const DEFAULT_ROBOT_RADIUS: f64 = 0.3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cell {
    Free,
    Wall,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MazeError {
    #[error("maze is empty")]
    Empty,
    #[error("row {row} has {found} columns, expected {expected}: rows must all be the same width")]
    NonRectangular { row: usize, expected: usize, found: usize },
    #[error("no start marker 'S': exactly one start cell is required")]
    NoStart,
    #[error("second start marker at row {row}, column {col}: exactly one start cell is required")]
    MultipleStarts { row: usize, col: usize },
    #[error("boundary cell at row {row}, column {col} is not '#': the outer boundary must be wall")]
    OpenBoundary { row: usize, col: usize },
    #[error("unexpected character {glyph:?} at row {row}, column {col}: only '#', '.' and 'S' are allowed")]
    UnknownGlyph { row: usize, col: usize, glyph: char },
}

/// Static maze arena.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridWorld {
    pub geometry: GridGeometry,
    pub cells: Vec<Cell>,
    pub start_pose: Pose2D,
    pub robot_radius: f64,
}

/// Parses an ASCII maze with the default resolution and robot radius.
pub fn load_maze(text: &str) -> Result<GridWorld, MazeError> {
    GridWorld::parse(text, DEFAULT_RESOLUTION, DEFAULT_ROBOT_RADIUS)
}

impl GridWorld {
    /// Parses `#` (wall), `.` (free) and `S` (free start) rows. The first
    /// text row is the top of the world.
    pub fn parse(text: &str, resolution: f64, robot_radius: f64) -> Result<Self, MazeError> {
        assert!(resolution > 0.0, "resolution must be positive");
        let rows: Vec<&str> = text
            .lines()
            .map(|l| l.strip_suffix('\r').unwrap_or(l))
            .collect::<Vec<_>>();
        let rows: Vec<&str> = {
            let mut end = rows.len();
            while end > 0 && rows[end - 1].is_empty() {
                end -= 1;
            }
            rows[..end].to_vec()
        };
        if rows.is_empty() || rows[0].is_empty() {
            return Err(MazeError::Empty);
        }
        let width = rows[0].chars().count();
        let height = rows.len();
        let geometry = GridGeometry::new(width, height, resolution);
        let mut cells = vec![Cell::Wall; width * height];
        let mut start = None;
        for (row, line) in rows.iter().enumerate() {
            let found = line.chars().count();
            if found != width {
                return Err(MazeError::NonRectangular {
                    row,
                    expected: width,
                    found,
                });
            }
            let j = height - 1 - row;
            for (col, glyph) in line.chars().enumerate() {
                let cell = match glyph {
                    '#' => Cell::Wall,
                    '.' => Cell::Free,
                    'S' => {
                        if start.is_some() {
                            return Err(MazeError::MultipleStarts { row, col });
                        }
                        start = Some((col, j));
                        Cell::Free
                    }
                    other => {
                        return Err(MazeError::UnknownGlyph {
                            row,
                            col,
                            glyph: other,
                        })
                    }
                };
                cells[geometry.index(col, j)] = cell;
            }
        }
        for (row, line) in rows.iter().enumerate() {
            for (col, glyph) in line.chars().enumerate() {
                let edge = row == 0 || row == height - 1 || col == 0 || col == width - 1;
                if edge && glyph != '#' {
                    return Err(MazeError::OpenBoundary { row, col });
                }
            }
        }
        let (si, sj) = start.ok_or(MazeError::NoStart)?;
        let (sx, sy) = geometry.cell_center(si, sj);
        Ok(Self {
            geometry,
            cells,
            start_pose: Pose2D::new(sx, sy, 0.0),
            robot_radius,
        })
    }

    pub fn width(&self) -> usize {
        self.geometry.width
    }

    pub fn height(&self) -> usize {
        self.geometry.height
    }

    pub fn resolution(&self) -> f64 {
        self.geometry.resolution
    }

    /// Cell state; anything outside the raster counts as wall.
    pub fn cell(&self, i: i64, j: i64) -> Cell {
        if self.geometry.contains(i, j) {
            self.cells[self.geometry.index(i as usize, j as usize)]
        } else {
            Cell::Wall
        }
    }

    pub fn is_wall(&self, i: i64, j: i64) -> bool {
        self.cell(i, j) == Cell::Wall
    }

    /// Renders back to the ASCII format, marking the start cell.
    pub fn to_ascii(&self) -> String {
        let start = self
            .geometry
            .world_to_cell(self.start_pose.x, self.start_pose.y);
        let mut out = String::with_capacity((self.width() + 1) * self.height());
        for j in (0..self.height()).rev() {
            for i in 0..self.width() {
                let glyph = match self.cells[self.geometry.index(i, j)] {
                    Cell::Wall => '#',
                    Cell::Free if start == Some((i, j)) => 'S',
                    Cell::Free => '.',
                };
                out.push(glyph);
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_by_three_with_center_start() {
        let w = load_maze("###\n#S#\n###\n").unwrap();
        assert_eq!((w.width(), w.height()), (3, 3));
        assert_eq!(w.cell(1, 1), Cell::Free);
        assert_eq!(w.start_pose, Pose2D::new(0.375, 0.375, 0.0));
        assert_eq!(w.to_ascii(), "###\n#S#\n###\n");
    }

    #[test]
    fn ragged_rows_rejected() {
        assert_eq!(
            load_maze("####\n#S#\n####"),
            Err(MazeError::NonRectangular {
                row: 1,
                expected: 4,
                found: 3
            })
        );
    }

    #[test]
    fn missing_start_rejected() {
        assert_eq!(load_maze("###\n#.#\n###"), Err(MazeError::NoStart));
    }

    #[test]
    fn open_boundary_rejected() {
        assert_eq!(
            load_maze("#.#\n#S#\n###"),
            Err(MazeError::OpenBoundary { row: 0, col: 1 })
        );
    }

    #[test]
    fn stray_glyphs_and_duplicate_starts_rejected() {
        assert!(matches!(
            load_maze("###\n#S #\n###"),
            Err(MazeError::NonRectangular { .. })
        ));
        assert!(matches!(
            load_maze("####\n#S #\n####"),
            Err(MazeError::UnknownGlyph { glyph: ' ', .. })
        ));
        assert!(matches!(
            load_maze("####\n#SS#\n####"),
            Err(MazeError::MultipleStarts { .. })
        ));
    }

    #[test]
    fn top_text_row_is_highest_y() {
        let w = load_maze("####\n#S.#\n#..#\n####").unwrap();
        assert_eq!(w.geometry.world_to_cell(w.start_pose.x, w.start_pose.y), Some((1, 2)));
    }
}

/// Row-major H x W image.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelMap<T> {
    pub height: usize,
    pub width: usize,
    pub data: Vec<T>,
}

impl<T: Clone> PixelMap<T> {
    pub fn filled(height: usize, width: usize, value: T) -> Self {
        Self { height, width, data: vec![value; height * width] }
    }
}

impl<T> PixelMap<T> {
    pub fn from_vec(height: usize, width: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), height * width, "map data length must be height * width");
        Self { height, width, data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, row: usize, col: usize) -> &T {
        &self.data[row * self.width + col]
    }

    pub fn same_shape<U>(&self, other: &PixelMap<U>) -> bool {
        self.height == other.height && self.width == other.width
    }
}

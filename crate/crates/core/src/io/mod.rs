//! File formats: point cloud readers/writers, the SPCV container and the
//! quantized codec export.

mod codec;
mod container;
mod pointcloud;
mod spcv;

pub use codec::{
    data_ranges, dequantize_frames, export_codec_frames, import_codec_frames, quantize_frames, quantize_frames_in,
    AxisRange, QuantizedFrameSet, SIDECAR_NAME,
};
pub use container::{FrameMeta, SpcvContainer};
pub use pointcloud::{parse_point_cloud, ply_binary_bytes, read_point_cloud, write_ply_binary, write_xyz, PointFormat};
pub use spcv::{decode_spcv, encode_spcv, read_spcv, write_spcv, HEADER_LEN, MAGIC, VERSION};

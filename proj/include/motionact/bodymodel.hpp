#pragma once

#include <string>
#include <vector>

#include "motionact/nn.hpp"
#include "motionact/tape.hpp"
#include "motionact/tensor.hpp"

namespace motionact::body {

inline constexpr int64_t kJoints = 55;
inline constexpr int64_t kSurfacePoints = 431;
inline constexpr int64_t kHybridPoints = kSurfacePoints + kJoints;  // 486
inline constexpr int64_t kPoseDims = 3 + kJoints * 3;               // 168
inline constexpr int64_t kHybridDims = kHybridPoints * 3;           // 1458

// SMPL-X joint ordering: body, head/eyes, then 15 left and 15 right finger
// joints (index/middle/pinky/ring/thumb, three segments each).
enum Joint : int32_t {
  Pelvis = 0, LHip, RHip, Spine1, LKnee, RKnee, Spine2, LAnkle, RAnkle, Spine3,
  LFoot, RFoot, Neck, LCollar, RCollar, Head, LShoulder, RShoulder, LElbow,
  RElbow, LWrist, RWrist, Jaw, LEye, REye,
  LIndex1, LIndex2, LIndex3, LMiddle1, LMiddle2, LMiddle3, LPinky1, LPinky2,
  LPinky3, LRing1, LRing2, LRing3, LThumb1, LThumb2, LThumb3,
  RIndex1, RIndex2, RIndex3, RMiddle1, RMiddle2, RMiddle3, RPinky1, RPinky2,
  RPinky3, RRing1, RRing2, RRing3, RThumb1, RThumb2, RThumb3,
};

// Procedural 55-joint articulated body. Pose parameters are a root
// translation plus one axis-angle rotation per joint; surface points ride on
// the skeleton through linear blend skinning of a fixed template.
struct KinematicTree {
  std::vector<int32_t> parent;   // parent[0] == -1, parent[i] < i
  Tensor rest_offset;            // [55,3]; row 0 is the root's world rest position
  std::vector<int32_t> foot_joints;
  Tensor template_points;        // [431,3] rest pose, world space
  Tensor skin_weights;           // [431,55], each row sums to 1

  // Derived after load/build.
  Tensor rest_global;            // [55,3] joint positions at rest

  void finalize();               // validates invariants, fills rest_global
  uint64_t content_hash() const;
};

// The fixed MiniBody used throughout: proportions are defined in the builder.
KinematicTree build_minibody();

// "MBDY" file: magic, u32 version, u32 joints, u32 points, u32 feet, then the
// tree arrays in declared order as f64 LE, then the config trailer.
void save_minibody(const std::string& path, const KinematicTree& tree, const std::string& echo);
KinematicTree load_minibody(const std::string& path);

// axis-angle [3] -> row-major rotation [9], and its inverse
void rodrigues(const double aa[3], double r[9]);
void rotation_log(const double r[9], double aa[3]);

// pose: 168 values (translation + 55 axis-angle). Results in meters.
Tensor fk_joints(const KinematicTree& tree, const double* pose);          // [55,3]
Tensor skin_surface(const KinematicTree& tree, const double* pose);       // [431,3]
Tensor hybrid_frame(const KinematicTree& tree, const double* pose);       // [486,3]

// poses [T,168] -> hybrid motion [T,1458] (surface block then keypoints)
Tensor extract_hybrid(const KinematicTree& tree, const Tensor& poses);

// hybrid motion [T,1458] -> keypoint block [T,165] / surface block [T,1293]
Tensor keypoint_block(const Tensor& motion);
Tensor surface_block(const Tensor& motion);

// 6-D rotation representation adapter (first two rotation-matrix columns).
// aa [T,168] <-> r6 [T, 3 + 55*6 = 333]
Tensor aa_to_rot6d(const Tensor& poses);
Tensor rot6d_to_aa(const Tensor& poses6d);

// Pose-parameter regressor: per-frame input (point coordinates), three
// residual blocks, then a temporal convolution head emitting 168 values.
struct GpNetwork {
  int64_t in_dims = kHybridDims;
  int64_t hidden = 512;
  nn::ParamSet params;

  static GpNetwork init(int64_t in_dims, int64_t hidden, Rng& rng);
  NodeId forward(Tape& t, const nn::Binding& b, NodeId frames) const;  // [T,in] -> [T,168]
};

// Graph builder usable with any binding that carries the "gp.*" parameters.
NodeId gp_forward_graph(Tape& t, const nn::Binding& b, NodeId frames);

// Inference convenience (scratch tape).
Tensor gp_recover(const GpNetwork& net, const Tensor& frames);

// Mean absolute difference over all pose-parameter entries.
double l_sx(const Tensor& pred, const Tensor& gt);

}  // namespace motionact::body

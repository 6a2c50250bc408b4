#include "motionact/bodymodel.hpp"

#include <cmath>
#include <cstring>

#include "motionact/io.hpp"

namespace motionact::body {

namespace {

struct JointSpec {
  int32_t parent;
  double off[3];
};

// Proportions of the MiniBody (meters, y up, z forward). Row 0 holds the
// pelvis rest position in world space; all other rows are offsets from the
// parent joint. Arms hang down, fingers point down.
const JointSpec kJointSpecs[kJoints] = {
    {-1, {0.0, 0.95, 0.0}},        // pelvis
    {Pelvis, {0.09, -0.06, 0.0}},  // L hip
    {Pelvis, {-0.09, -0.06, 0.0}},
    {Pelvis, {0.0, 0.11, 0.0}},    // spine1
    {LHip, {0.0, -0.40, 0.0}},     // knees
    {RHip, {0.0, -0.40, 0.0}},
    {Spine1, {0.0, 0.12, 0.0}},
    {LKnee, {0.0, -0.41, 0.0}},    // ankles (rest height 0.08)
    {RKnee, {0.0, -0.41, 0.0}},
    {Spine2, {0.0, 0.12, 0.0}},
    {LAnkle, {0.0, -0.06, 0.13}},  // toes (rest height 0.02)
    {RAnkle, {0.0, -0.06, 0.13}},
    {Spine3, {0.0, 0.10, 0.0}},    // neck
    {Spine3, {0.05, 0.06, 0.0}},   // collars
    {Spine3, {-0.05, 0.06, 0.0}},
    {Neck, {0.0, 0.12, 0.0}},      // head
    {LCollar, {0.12, 0.0, 0.0}},   // shoulders
    {RCollar, {-0.12, 0.0, 0.0}},
    {LShoulder, {0.0, -0.26, 0.0}},  // elbows
    {RShoulder, {0.0, -0.26, 0.0}},
    {LElbow, {0.0, -0.25, 0.0}},   // wrists
    {RElbow, {0.0, -0.25, 0.0}},
    {Head, {0.0, 0.02, 0.05}},     // jaw
    {Head, {0.03, 0.05, 0.08}},    // eyes
    {Head, {-0.03, 0.05, 0.08}},
    // left fingers
    {LWrist, {0.01, -0.09, 0.03}},   {LIndex1, {0.0, -0.03, 0.0}},  {LIndex2, {0.0, -0.025, 0.0}},
    {LWrist, {0.01, -0.095, 0.01}},  {LMiddle1, {0.0, -0.033, 0.0}}, {LMiddle2, {0.0, -0.027, 0.0}},
    {LWrist, {0.01, -0.085, -0.03}}, {LPinky1, {0.0, -0.025, 0.0}}, {LPinky2, {0.0, -0.02, 0.0}},
    {LWrist, {0.01, -0.09, -0.01}},  {LRing1, {0.0, -0.03, 0.0}},   {LRing2, {0.0, -0.025, 0.0}},
    {LWrist, {0.025, -0.03, 0.04}},  {LThumb1, {0.0, -0.03, 0.01}}, {LThumb2, {0.0, -0.025, 0.008}},
    // right fingers (mirrored in x)
    {RWrist, {-0.01, -0.09, 0.03}},   {RIndex1, {0.0, -0.03, 0.0}},  {RIndex2, {0.0, -0.025, 0.0}},
    {RWrist, {-0.01, -0.095, 0.01}},  {RMiddle1, {0.0, -0.033, 0.0}}, {RMiddle2, {0.0, -0.027, 0.0}},
    {RWrist, {-0.01, -0.085, -0.03}}, {RPinky1, {0.0, -0.025, 0.0}}, {RPinky2, {0.0, -0.02, 0.0}},
    {RWrist, {-0.01, -0.09, -0.01}},  {RRing1, {0.0, -0.03, 0.0}},   {RRing2, {0.0, -0.025, 0.0}},
    {RWrist, {-0.025, -0.03, 0.04}},  {RThumb1, {0.0, -0.03, 0.01}}, {RThumb2, {0.0, -0.025, 0.008}},
};

struct Transforms {
  // row-major 3x3 per joint + world position
  std::vector<double> rot;  // 55*9
  std::vector<double> pos;  // 55*3
};

Transforms global_transforms(const KinematicTree& tree, const double* pose) {
  for (int64_t i = 0; i < kPoseDims; i++)
    if (!std::isfinite(pose[i])) fail("forward_kinematics: non-finite pose parameter");
  Transforms g;
  g.rot.resize(kJoints * 9);
  g.pos.resize(kJoints * 3);
  for (int64_t j = 0; j < kJoints; j++) {
    double local[9];
    rodrigues(pose + 3 + j * 3, local);
    const double* off = &tree.rest_offset.data[static_cast<size_t>(j * 3)];
    if (j == 0) {
      std::memcpy(&g.rot[0], local, 9 * sizeof(double));
      for (int k = 0; k < 3; k++) g.pos[k] = off[k] + pose[k];
      continue;
    }
    int32_t p = tree.parent[static_cast<size_t>(j)];
    const double* pr = &g.rot[p * 9];
    // position: parent position + parent global rotation applied to offset
    for (int r = 0; r < 3; r++)
      g.pos[j * 3 + r] =
          g.pos[p * 3 + r] + pr[r * 3 + 0] * off[0] + pr[r * 3 + 1] * off[1] + pr[r * 3 + 2] * off[2];
    // rotation: parent global * local
    double* gr = &g.rot[j * 9];
    for (int r = 0; r < 3; r++)
      for (int c = 0; c < 3; c++)
        gr[r * 3 + c] = pr[r * 3 + 0] * local[0 * 3 + c] + pr[r * 3 + 1] * local[1 * 3 + c] +
                        pr[r * 3 + 2] * local[2 * 3 + c];
  }
  return g;
}

}  // namespace

void rodrigues(const double aa[3], double r[9]) {
  double theta = std::sqrt(aa[0] * aa[0] + aa[1] * aa[1] + aa[2] * aa[2]);
  if (theta < 1e-12) {
    // first-order: I + skew(aa)
    r[0] = 1.0; r[1] = -aa[2]; r[2] = aa[1];
    r[3] = aa[2]; r[4] = 1.0; r[5] = -aa[0];
    r[6] = -aa[1]; r[7] = aa[0]; r[8] = 1.0;
    return;
  }
  double kx = aa[0] / theta, ky = aa[1] / theta, kz = aa[2] / theta;
  double s = std::sin(theta), c = std::cos(theta), v = 1.0 - c;
  r[0] = c + kx * kx * v;       r[1] = kx * ky * v - kz * s;  r[2] = kx * kz * v + ky * s;
  r[3] = ky * kx * v + kz * s;  r[4] = c + ky * ky * v;       r[5] = ky * kz * v - kx * s;
  r[6] = kz * kx * v - ky * s;  r[7] = kz * ky * v + kx * s;  r[8] = c + kz * kz * v;
}

void rotation_log(const double r[9], double aa[3]) {
  double tr = r[0] + r[4] + r[8];
  double cos_t = std::min(1.0, std::max(-1.0, (tr - 1.0) / 2.0));
  double theta = std::acos(cos_t);
  if (theta < 1e-8) {
    aa[0] = 0.5 * (r[7] - r[5]);
    aa[1] = 0.5 * (r[2] - r[6]);
    aa[2] = 0.5 * (r[3] - r[1]);
    return;
  }
  if (theta > M_PI - 1e-5) {
    // near pi: extract axis from the symmetric part
    double xx = std::sqrt(std::max(0.0, (r[0] + 1.0) / 2.0));
    double yy = std::sqrt(std::max(0.0, (r[4] + 1.0) / 2.0));
    double zz = std::sqrt(std::max(0.0, (r[8] + 1.0) / 2.0));
    // signs from off-diagonals (largest component positive)
    if (xx >= yy && xx >= zz) {
      yy = std::copysign(yy, r[1]);
      zz = std::copysign(zz, r[2]);
    } else if (yy >= zz) {
      xx = std::copysign(xx, r[1]);
      zz = std::copysign(zz, r[5]);
    } else {
      xx = std::copysign(xx, r[2]);
      yy = std::copysign(yy, r[5]);
    }
    aa[0] = theta * xx;
    aa[1] = theta * yy;
    aa[2] = theta * zz;
    return;
  }
  double scale = theta / (2.0 * std::sin(theta));
  aa[0] = scale * (r[7] - r[5]);
  aa[1] = scale * (r[2] - r[6]);
  aa[2] = scale * (r[3] - r[1]);
}

void KinematicTree::finalize() {
  if (static_cast<int64_t>(parent.size()) != kJoints || parent[0] != -1)
    fail("minibody: malformed parent array");
  for (int64_t j = 1; j < kJoints; j++)
    if (parent[static_cast<size_t>(j)] < 0 || parent[static_cast<size_t>(j)] >= j)
      fail("minibody: parent index must precede child (joint " + std::to_string(j) + ")");
  if (rest_offset.shape != Shape{kJoints, 3}) fail("minibody: bad rest_offset shape");
  if (template_points.shape != Shape{kSurfacePoints, 3}) fail("minibody: bad template shape");
  if (skin_weights.shape != Shape{kSurfacePoints, kJoints}) fail("minibody: bad skin_weights shape");
  for (int64_t i = 0; i < kSurfacePoints; i++) {
    double s = 0.0;
    for (int64_t j = 0; j < kJoints; j++) {
      double w = skin_weights.at(i, j);
      if (w < 0.0) fail("minibody: negative skin weight");
      s += w;
    }
    if (std::fabs(s - 1.0) > 1e-9)
      fail("minibody: skin weights of point " + std::to_string(i) + " sum to " + std::to_string(s));
  }
  if (foot_joints.empty()) fail("minibody: no foot joints flagged");

  rest_global = Tensor({kJoints, 3});
  for (int64_t j = 0; j < kJoints; j++) {
    const double* off = &rest_offset.data[static_cast<size_t>(j * 3)];
    if (j == 0) {
      for (int k = 0; k < 3; k++) rest_global.at(0, k) = off[k];
    } else {
      int32_t p = parent[static_cast<size_t>(j)];
      for (int k = 0; k < 3; k++) rest_global.at(j, k) = rest_global.at(p, k) + off[k];
    }
  }
}

uint64_t KinematicTree::content_hash() const {
  uint64_t h = fnv1a64("MBDY", 4);
  h = fnv1a64_append(h, parent.data(), parent.size() * sizeof(int32_t));
  h = fnv1a64_append(h, rest_offset.data.data(), rest_offset.data.size() * 8);
  h = fnv1a64_append(h, foot_joints.data(), foot_joints.size() * sizeof(int32_t));
  h = fnv1a64_append(h, template_points.data.data(), template_points.data.size() * 8);
  h = fnv1a64_append(h, skin_weights.data.data(), skin_weights.data.size() * 8);
  return h;
}

KinematicTree build_minibody() {
  KinematicTree tree;
  tree.parent.resize(kJoints);
  tree.rest_offset = Tensor({kJoints, 3});
  for (int64_t j = 0; j < kJoints; j++) {
    tree.parent[static_cast<size_t>(j)] = kJointSpecs[j].parent;
    for (int k = 0; k < 3; k++) tree.rest_offset.at(j, k) = kJointSpecs[j].off[k];
  }
  tree.foot_joints = {LAnkle, RAnkle, LFoot, RFoot};

  // Rest joint positions, needed to place surface points.
  std::vector<double> rest(kJoints * 3);
  for (int64_t j = 0; j < kJoints; j++)
    for (int k = 0; k < 3; k++)
      rest[j * 3 + k] =
          (j == 0 ? 0.0 : rest[tree.parent[static_cast<size_t>(j)] * 3 + k]) + kJointSpecs[j].off[k];

  struct Blob {
    int32_t joint;
    int count;
    double radius;
  };
  struct BonePoints {
    int32_t joint;  // points live on the bone parent(joint) -> joint
    int count;
    double radius;
  };
  const std::vector<Blob> blobs = {
      {Pelvis, 35, 0.13}, {Spine1, 20, 0.12}, {Spine2, 20, 0.12}, {Spine3, 35, 0.13},
      {Neck, 6, 0.05},    {Head, 45, 0.10},   {Jaw, 4, 0.03},     {LEye, 2, 0.012},
      {REye, 2, 0.012},   {LCollar, 6, 0.045},{RCollar, 6, 0.045},{LFoot, 3, 0.02},
      {RFoot, 3, 0.02},   {LWrist, 12, 0.035},{RWrist, 12, 0.035},
  };
  const std::vector<BonePoints> bones = {
      {LElbow, 21, 0.045}, {RElbow, 21, 0.045},   // upper arms
      {LWrist, 14, 0.04},  {RWrist, 14, 0.04},    // forearms
      {LKnee, 23, 0.07},   {RKnee, 23, 0.07},     // thighs
      {LAnkle, 16, 0.05},  {RAnkle, 16, 0.05},    // shins
      {LFoot, 6, 0.03},    {RFoot, 6, 0.03},      // feet
  };

  tree.template_points = Tensor({kSurfacePoints, 3});
  tree.skin_weights = Tensor({kSurfacePoints, kJoints});
  Rng rng(20240901);  // fixed: the template is part of the model definition
  int64_t row = 0;

  auto place_blob = [&](int32_t joint, int count, double radius) {
    int32_t par = tree.parent[static_cast<size_t>(joint)];
    for (int i = 0; i < count; i++) {
      double dir[3] = {rng.normal(), rng.normal(), rng.normal()};
      double n = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]) + 1e-12;
      double r = radius * (0.7 + 0.5 * rng.uniform());
      for (int k = 0; k < 3; k++)
        tree.template_points.at(row, k) = rest[joint * 3 + k] + dir[k] / n * r;
      if (par < 0) {
        tree.skin_weights.at(row, joint) = 1.0;
      } else {
        tree.skin_weights.at(row, joint) = 0.85;
        tree.skin_weights.at(row, par) = 0.15;
      }
      row++;
    }
  };
  auto place_bone = [&](int32_t joint, int count, double radius) {
    int32_t par = tree.parent[static_cast<size_t>(joint)];
    double axis[3], u[3], v[3];
    for (int k = 0; k < 3; k++) axis[k] = rest[joint * 3 + k] - rest[par * 3 + k];
    double len = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]) + 1e-12;
    for (int k = 0; k < 3; k++) axis[k] /= len;
    // orthonormal frame around the bone
    double ref[3] = {1.0, 0.0, 0.0};
    if (std::fabs(axis[0]) > 0.9) { ref[0] = 0.0; ref[1] = 1.0; }
    u[0] = axis[1] * ref[2] - axis[2] * ref[1];
    u[1] = axis[2] * ref[0] - axis[0] * ref[2];
    u[2] = axis[0] * ref[1] - axis[1] * ref[0];
    double un = std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]) + 1e-12;
    for (int k = 0; k < 3; k++) u[k] /= un;
    v[0] = axis[1] * u[2] - axis[2] * u[1];
    v[1] = axis[2] * u[0] - axis[0] * u[2];
    v[2] = axis[0] * u[1] - axis[1] * u[0];
    for (int i = 0; i < count; i++) {
      double t = 0.15 + 0.7 * rng.uniform();
      double phi = 2.0 * M_PI * rng.uniform();
      double r = radius * (0.8 + 0.4 * rng.uniform());
      for (int k = 0; k < 3; k++)
        tree.template_points.at(row, k) = rest[par * 3 + k] + t * (rest[joint * 3 + k] - rest[par * 3 + k]) +
                                          r * (std::cos(phi) * u[k] + std::sin(phi) * v[k]);
      double wj = 0.5 * (3.0 * t * t - 2.0 * t * t * t);  // eases toward the distal joint
      tree.skin_weights.at(row, joint) = wj;
      tree.skin_weights.at(row, par) = 1.0 - wj;
      row++;
    }
  };

  for (const auto& b : blobs) place_blob(b.joint, b.count, b.radius);
  for (const auto& b : bones) place_bone(b.joint, b.count, b.radius);
  // two points per finger segment
  for (int32_t j = LIndex1; j <= RThumb3; j++) place_bone(j, 2, 0.009);

  if (row != kSurfacePoints)
    fail("minibody: template point count " + std::to_string(row) + " != 431");
  tree.finalize();
  return tree;
}

void save_minibody(const std::string& path, const KinematicTree& tree, const std::string& echo) {
  ByteWriter w;
  w.magic("MBDY");
  w.u32(1);  // version
  w.u32(static_cast<uint32_t>(kJoints));
  w.u32(static_cast<uint32_t>(kSurfacePoints));
  w.u32(static_cast<uint32_t>(tree.foot_joints.size()));
  for (int32_t p : tree.parent) w.f64(static_cast<double>(p));
  w.f64s(tree.rest_offset.data);
  for (int32_t f : tree.foot_joints) w.f64(static_cast<double>(f));
  w.f64s(tree.template_points.data);
  w.f64s(tree.skin_weights.data);
  w.trailer(echo);
  w.save(path);
}

KinematicTree load_minibody(const std::string& path) {
  ByteReader r(read_file_bytes(path), path);
  r.expect_magic("MBDY");
  if (r.u32() != 1) fail("'" + path + "': unsupported MBDY version");
  if (r.u32() != kJoints || r.u32() != kSurfacePoints) fail("'" + path + "': unexpected MBDY dims");
  uint32_t nfeet = r.u32();
  KinematicTree tree;
  tree.parent.resize(kJoints);
  for (auto& p : tree.parent) p = static_cast<int32_t>(r.f64());
  tree.rest_offset = Tensor({kJoints, 3});
  r.f64s(tree.rest_offset.data.data(), tree.rest_offset.data.size());
  tree.foot_joints.resize(nfeet);
  for (auto& f : tree.foot_joints) f = static_cast<int32_t>(r.f64());
  tree.template_points = Tensor({kSurfacePoints, 3});
  r.f64s(tree.template_points.data.data(), tree.template_points.data.size());
  tree.skin_weights = Tensor({kSurfacePoints, kJoints});
  r.f64s(tree.skin_weights.data.data(), tree.skin_weights.data.size());
  tree.finalize();
  return tree;
}

Tensor fk_joints(const KinematicTree& tree, const double* pose) {
  Transforms g = global_transforms(tree, pose);
  Tensor out({kJoints, 3});
  std::memcpy(out.data.data(), g.pos.data(), g.pos.size() * sizeof(double));
  return out;
}

Tensor skin_surface(const KinematicTree& tree, const double* pose) {
  Transforms g = global_transforms(tree, pose);
  Tensor out({kSurfacePoints, 3});
  for (int64_t i = 0; i < kSurfacePoints; i++) {
    const double* x = &tree.template_points.data[static_cast<size_t>(i * 3)];
    double acc[3] = {0.0, 0.0, 0.0};
    for (int64_t j = 0; j < kJoints; j++) {
      double w = tree.skin_weights.at(i, j);
      if (w == 0.0) continue;
      const double* rj = &g.rot[j * 9];
      const double* pj = &g.pos[j * 3];
      const double* restj = &tree.rest_global.data[static_cast<size_t>(j * 3)];
      double local[3] = {x[0] - restj[0], x[1] - restj[1], x[2] - restj[2]};
      for (int r = 0; r < 3; r++)
        acc[r] += w * (pj[r] + rj[r * 3 + 0] * local[0] + rj[r * 3 + 1] * local[1] +
                       rj[r * 3 + 2] * local[2]);
    }
    for (int r = 0; r < 3; r++) out.at(i, r) = acc[r];
  }
  return out;
}

Tensor hybrid_frame(const KinematicTree& tree, const double* pose) {
  Tensor surface = skin_surface(tree, pose);
  Tensor joints = fk_joints(tree, pose);
  Tensor out({kHybridPoints, 3});
  std::copy(surface.data.begin(), surface.data.end(), out.data.begin());
  std::copy(joints.data.begin(), joints.data.end(), out.data.begin() + surface.numel());
  return out;
}

Tensor extract_hybrid(const KinematicTree& tree, const Tensor& poses) {
  if (poses.shape.size() != 2 || poses.shape[1] != kPoseDims)
    fail("extract_hybrid: poses must be [T,168], got " + shape_str(poses.shape));
  Tensor out({poses.shape[0], kHybridDims});
  for (int64_t t = 0; t < poses.shape[0]; t++) {
    Tensor frame = hybrid_frame(tree, &poses.data[static_cast<size_t>(t * kPoseDims)]);
    std::copy(frame.data.begin(), frame.data.end(), out.data.begin() + t * kHybridDims);
  }
  return out;
}

Tensor keypoint_block(const Tensor& motion) {
  if (motion.shape.size() != 2 || motion.shape[1] != kHybridDims)
    fail("keypoint_block: motion must be [T,1458], got " + shape_str(motion.shape));
  int64_t t_len = motion.shape[0];
  Tensor out({t_len, kJoints * 3});
  for (int64_t t = 0; t < t_len; t++)
    std::copy(motion.data.begin() + t * kHybridDims + kSurfacePoints * 3,
              motion.data.begin() + (t + 1) * kHybridDims, out.data.begin() + t * kJoints * 3);
  return out;
}

Tensor surface_block(const Tensor& motion) {
  if (motion.shape.size() != 2 || motion.shape[1] != kHybridDims)
    fail("surface_block: motion must be [T,1458], got " + shape_str(motion.shape));
  int64_t t_len = motion.shape[0];
  Tensor out({t_len, kSurfacePoints * 3});
  for (int64_t t = 0; t < t_len; t++)
    std::copy(motion.data.begin() + t * kHybridDims,
              motion.data.begin() + t * kHybridDims + kSurfacePoints * 3,
              out.data.begin() + t * kSurfacePoints * 3);
  return out;
}

Tensor aa_to_rot6d(const Tensor& poses) {
  if (poses.shape.size() != 2 || poses.shape[1] != kPoseDims)
    fail("aa_to_rot6d: poses must be [T,168], got " + shape_str(poses.shape));
  int64_t t_len = poses.shape[0];
  Tensor out({t_len, 3 + kJoints * 6});
  for (int64_t t = 0; t < t_len; t++) {
    const double* p = &poses.data[static_cast<size_t>(t * kPoseDims)];
    double* o = &out.data[static_cast<size_t>(t * (3 + kJoints * 6))];
    o[0] = p[0]; o[1] = p[1]; o[2] = p[2];
    for (int64_t j = 0; j < kJoints; j++) {
      double r[9];
      rodrigues(p + 3 + j * 3, r);
      // first two columns of R
      double* d = o + 3 + j * 6;
      d[0] = r[0]; d[1] = r[3]; d[2] = r[6];
      d[3] = r[1]; d[4] = r[4]; d[5] = r[7];
    }
  }
  return out;
}

Tensor rot6d_to_aa(const Tensor& poses6d) {
  if (poses6d.shape.size() != 2 || poses6d.shape[1] != 3 + kJoints * 6)
    fail("rot6d_to_aa: poses must be [T,333], got " + shape_str(poses6d.shape));
  int64_t t_len = poses6d.shape[0];
  Tensor out({t_len, kPoseDims});
  for (int64_t t = 0; t < t_len; t++) {
    const double* p = &poses6d.data[static_cast<size_t>(t * (3 + kJoints * 6))];
    double* o = &out.data[static_cast<size_t>(t * kPoseDims)];
    o[0] = p[0]; o[1] = p[1]; o[2] = p[2];
    for (int64_t j = 0; j < kJoints; j++) {
      const double* d = p + 3 + j * 6;
      // Gram-Schmidt: b1 from the first column, b2 orthogonalized second
      double a1[3] = {d[0], d[1], d[2]};
      double a2[3] = {d[3], d[4], d[5]};
      double n1 = std::sqrt(a1[0] * a1[0] + a1[1] * a1[1] + a1[2] * a1[2]) + 1e-12;
      double b1[3] = {a1[0] / n1, a1[1] / n1, a1[2] / n1};
      double dot = b1[0] * a2[0] + b1[1] * a2[1] + b1[2] * a2[2];
      double b2[3] = {a2[0] - dot * b1[0], a2[1] - dot * b1[1], a2[2] - dot * b1[2]};
      double n2 = std::sqrt(b2[0] * b2[0] + b2[1] * b2[1] + b2[2] * b2[2]) + 1e-12;
      for (int k = 0; k < 3; k++) b2[k] /= n2;
      double b3[3] = {b1[1] * b2[2] - b1[2] * b2[1], b1[2] * b2[0] - b1[0] * b2[2],
                      b1[0] * b2[1] - b1[1] * b2[0]};
      double r[9] = {b1[0], b2[0], b3[0], b1[1], b2[1], b3[1], b1[2], b2[2], b3[2]};
      rotation_log(r, o + 3 + j * 3);
    }
  }
  return out;
}

GpNetwork GpNetwork::init(int64_t in_dims, int64_t hidden, Rng& rng) {
  GpNetwork net;
  net.in_dims = in_dims;
  net.hidden = hidden;
  nn::add_linear(net.params, "gp.proj", in_dims, hidden, rng);
  for (int b = 0; b < 3; b++) {
    std::string p = "gp.block" + std::to_string(b);
    nn::add_layer_norm(net.params, p + ".ln", hidden);
    nn::add_linear(net.params, p + ".fc1", hidden, hidden, rng);
    nn::add_linear(net.params, p + ".fc2", hidden, hidden, rng);
  }
  nn::add_conv1d(net.params, "gp.out", 3, hidden, kPoseDims, rng);
  return net;
}

NodeId gp_forward_graph(Tape& t, const nn::Binding& b, NodeId frames) {
  NodeId h = nn::linear(t, b, "gp.proj", frames);
  for (int blk = 0; blk < 3; blk++) {
    std::string p = "gp.block" + std::to_string(blk);
    NodeId y = nn::layer_norm(t, b, p + ".ln", h);
    y = nn::linear(t, b, p + ".fc1", y);
    y = t.gelu(y);
    y = nn::linear(t, b, p + ".fc2", y);
    h = t.add(h, y);
  }
  return nn::conv1d(t, b, "gp.out", h, 1, 1);
}

NodeId GpNetwork::forward(Tape& t, const nn::Binding& b, NodeId frames) const {
  if (t.value(frames).shape.size() != 2 || t.value(frames).shape[1] != in_dims)
    fail("gp_recover: frames must be [T," + std::to_string(in_dims) + "], got " +
         shape_str(t.value(frames).shape));
  return gp_forward_graph(t, b, frames);
}

Tensor gp_recover(const GpNetwork& net, const Tensor& frames) {
  Tape t;
  nn::Binding b(t, const_cast<nn::ParamSet&>(net.params));
  NodeId out = net.forward(t, b, t.leaf(frames));
  return t.value(out);
}

double l_sx(const Tensor& pred, const Tensor& gt) {
  if (!pred.same_shape(gt))
    fail("l_sx: shape mismatch " + shape_str(pred.shape) + " vs " + shape_str(gt.shape));
  double s = 0.0;
  for (int64_t i = 0; i < pred.numel(); i++) s += std::fabs(pred.data[i] - gt.data[i]);
  return s / static_cast<double>(pred.numel());
}

}  // namespace motionact::body

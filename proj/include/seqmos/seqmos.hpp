// seqmos - sequential LiDAR moving object segmentation toolkit
#ifndef SEQMOS_SEQMOS_HPP
#define SEQMOS_SEQMOS_HPP

#include "seqmos/config.hpp"
#include "seqmos/cylvoxel.hpp"
#include "seqmos/error.hpp"
#include "seqmos/eval.hpp"
#include "seqmos/geometry.hpp"
#include "seqmos/kitti_io.hpp"
#include "seqmos/loopclosure.hpp"
#include "seqmos/loss.hpp"
#include "seqmos/mapops.hpp"
#include "seqmos/nn/checkpoint.hpp"
#include "seqmos/nn/gradcheck.hpp"
#include "seqmos/nn/model.hpp"
#include "seqmos/nn/optim.hpp"
#include "seqmos/odometry.hpp"
#include "seqmos/residual.hpp"
#include "seqmos/settings.hpp"
#include "seqmos/synth.hpp"
#include "seqmos/train.hpp"
#include "seqmos/types.hpp"

#endif  // SEQMOS_SEQMOS_HPP

/* Control packet reception. */

#include <errno.h>
#include <string.h>
#include <sys/socket.h>
#include <netinet/in.h>

#include "../lib/thread.h"
#include "bfd.h"

struct bfd_global bglobal;

static int bfd_sock_is_mhop(int sd)
{
	return sd == bglobal.bg_mhop || sd == bglobal.bg_mhop6;
}

static void bfd_sd_reschedule(int sd)
{
	if (sd == bglobal.bg_shop)
		thread_add_read(bglobal.bg_master, bfd_recv_cb, NULL, sd, &bglobal.bg_ev[0]);
	else if (sd == bglobal.bg_mhop)
		thread_add_read(bglobal.bg_master, bfd_recv_cb, NULL, sd, &bglobal.bg_ev[1]);
	else if (sd == bglobal.bg_shop6)
		thread_add_read(bglobal.bg_master, bfd_recv_cb, NULL, sd, &bglobal.bg_ev[2]);
	else
		thread_add_read(bglobal.bg_master, bfd_recv_cb, NULL, sd, &bglobal.bg_ev[3]);
}

ssize_t bfd_recv_ipv4(int sd, uint8_t *msgbuf, size_t msgbuflen, uint8_t *ttl,
		      ifindex_t *ifindex, struct sockaddr_any *local,
		      struct sockaddr_any *peer)
{
	struct msghdr msghdr;
	struct iovec iov[1];
	ssize_t mlen;

	memset(&msghdr, 0, sizeof(msghdr));
	memset(peer, 0, sizeof(*peer));
	iov[0].iov_base = msgbuf;
	iov[0].iov_len = msgbuflen;
	msghdr.msg_name = &peer->sa_sin;
	msghdr.msg_namelen = sizeof(peer->sa_sin);
	msghdr.msg_iov = iov;
	msghdr.msg_iovlen = 1;

	mlen = recvmsg(sd, &msghdr, MSG_DONTWAIT);
	if (mlen == -1) {
		if (errno != EAGAIN)
			return -1;
		return -1;
	}
	*ttl = 255;
	*ifindex = 0;
	local->sa_sin.sin_family = AF_INET;
	return mlen;
}

ssize_t bfd_recv_ipv6(int sd, uint8_t *msgbuf, size_t msgbuflen, uint8_t *ttl,
		      ifindex_t *ifindex, struct sockaddr_any *local,
		      struct sockaddr_any *peer)
{
	struct msghdr msghdr;
	struct iovec iov[1];
	ssize_t mlen;

	memset(&msghdr, 0, sizeof(msghdr));
	memset(peer, 0, sizeof(*peer));
	iov[0].iov_base = msgbuf;
	iov[0].iov_len = msgbuflen;
	msghdr.msg_name = &peer->sa_sin6;
	msghdr.msg_namelen = sizeof(peer->sa_sin6);
	msghdr.msg_iov = iov;
	msghdr.msg_iovlen = 1;

	mlen = recvmsg(sd, &msghdr, MSG_DONTWAIT);
	if (mlen == -1)
		return -1;
	*ttl = 255;
	*ifindex = 0;
	local->sa_sin6.sin6_family = AF_INET6;
	return mlen;
}

void bfd_recv_cb(struct thread *t)
{
	int sd = THREAD_FD(t);
	struct bfd_session *bfd;
	struct bfd_pkt *cp;
	bool is_mhop;
	ssize_t mlen = 0;
	uint8_t ttl = 0;
	ifindex_t ifindex = 0;
	struct sockaddr_any local, peer;
	uint8_t msgbuf[BFD_PKT_INFO_LEN];

	/* Schedule next read. */
	bfd_sd_reschedule(sd);

	/* Check which socket the packet arrived on. */
	is_mhop = bfd_sock_is_mhop(sd);
	if (sd == bglobal.bg_shop || sd == bglobal.bg_mhop)
		mlen = bfd_recv_ipv4(sd, msgbuf, sizeof(msgbuf), &ttl, &ifindex, &local, &peer);
	else if (sd == bglobal.bg_shop6 || sd == bglobal.bg_mhop6)
		mlen = bfd_recv_ipv6(sd, msgbuf, sizeof(msgbuf), &ttl, &ifindex, &local, &peer);

	/* Implement RFC 5880 6.8.6 */
	if (mlen < BFD_PKT_LEN) {
		cp_debug(is_mhop, &peer, &local, ifindex, "too small (%ld bytes)", mlen);
		return;
	}

	cp = (struct bfd_pkt *)(msgbuf);
	if (BFD_GETVER(cp->diag) != BFD_VERSION) {
		cp_debug(is_mhop, &peer, &local, ifindex, "bad version %d", BFD_GETVER(cp->diag));
		return;
	}

	if (cp->detect_mult == 0) {
		cp_debug(is_mhop, &peer, &local, ifindex, "detect multiplier set to zero");
		return;
	}

	if ((cp->len < BFD_PKT_LEN) || (cp->len != mlen)) {
		cp_debug(is_mhop, &peer, &local, ifindex, "invalid length");
		return;
	}

	bfd = bfd_session_lookup(cp, &peer, &local, ifindex, is_mhop);
	if (bfd == NULL) {
		cp_debug(is_mhop, &peer, &local, ifindex, "no session found");
		return;
	}

	bfd_state_handle(bfd, BFD_GETSTATE(cp->flags));
}

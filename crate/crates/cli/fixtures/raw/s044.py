w = input().split()
print(' '.join(w[::1]))

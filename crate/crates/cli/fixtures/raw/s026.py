n = int(input())
a = list(map(int, input().split()))
c = 0
for x in a:
    if x % 2 == 1:
        c += 1
print(c)  # fixed by alice@example.com
